#include "plos/analysis.hpp"

#include "plos/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace plos {

SparseMatrix forgetful(std::size_t n) {
    if (n == 0) throw InputError("forgetful abstraction needs n >= 1");
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, 0, 1.0});
    return SparseMatrix::from_triplets(n, 1, std::move(t));
}

SparseMatrix classification(std::size_t n, const std::vector<std::size_t>& class_of, std::size_t classes) {
    if (class_of.size() != n) throw InputError("classification needs one class per row");
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
        if (class_of[i] >= classes) throw InputError("class index out of range");
        t.push_back({i, class_of[i], 1.0});
    }
    return SparseMatrix::from_triplets(n, classes, std::move(t));
}

Abstraction::Abstraction(std::vector<SparseMatrix> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw InputError("abstraction needs at least one factor");
    std::vector<SparseMatrix> inverses;
    inverses.reserve(factors_.size());
    for (const auto& f : factors_) inverses.push_back(plos::pseudo_inverse(f));
    a_ = kron_all(factors_);
    adag_ = kron_all(inverses);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits on sep outside of (), [] and {}.
std::vector<std::string> split_top(const std::string& s, char sep) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (c == sep && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// "name[inner]" -> inner, or nullopt when the kind has no bracket.
std::optional<std::string> bracket_body(const std::string& kind, const std::string& keyword) {
    if (kind.rfind(keyword, 0) != 0) return std::nullopt;
    std::string rest = trim(kind.substr(keyword.size()));
    if (!rest.empty() && rest[0] == ':') rest = trim(rest.substr(1));
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
        throw InputError("expected " + keyword + "[...] in abstraction spec, got '" + kind + "'");
    return rest.substr(1, rest.size() - 2);
}

SparseMatrix classes_factor(const VarDecl& decl, const std::string& body) {
    std::vector<std::size_t> class_of(decl.domain.size(), SIZE_MAX);
    const auto groups = split_top(body, ',');
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::string& grp = groups[g];
        if (grp.size() < 2 || grp.front() != '{' || grp.back() != '}')
            throw InputError("expected {v,...} class in '" + body + "'");
        for (const auto& item : split_top(grp.substr(1, grp.size() - 2), ',')) {
            Value v = 0;
            try {
                v = std::stoll(item);
            } catch (const std::exception&) {
                throw InputError("bad class value '" + item + "'");
            }
            auto it = std::find(decl.domain.begin(), decl.domain.end(), v);
            if (it == decl.domain.end())
                throw InputError("class value " + item + " outside domain of '" + decl.name + "'");
            auto& slot = class_of[static_cast<std::size_t>(it - decl.domain.begin())];
            if (slot != SIZE_MAX) throw InputError("value " + item + " appears in two classes");
            slot = g;
        }
    }
    for (std::size_t i = 0; i < class_of.size(); ++i)
        if (class_of[i] == SIZE_MAX)
            throw InputError("value " + std::to_string(decl.domain[i]) + " of '" + decl.name + "' is in no class");
    return classification(decl.domain.size(), class_of, groups.size());
}

SparseMatrix cases_factor(const std::vector<VarDecl>& group, const std::string& body) {
    const StateSpace sub(group);
    std::vector<Expr> cases;
    for (const auto& text : split_top(body, ',')) cases.push_back(parse_expr(text, group));
    std::vector<std::size_t> class_of(sub.size());
    for (std::size_t s = 0; s < sub.size(); ++s) {
        const Valuation v = sub.valuation(s);
        std::size_t hits = 0;
        for (std::size_t c = 0; c < cases.size(); ++c) {
            if (cases[c].holds(v)) {
                class_of[s] = c;
                ++hits;
            }
        }
        if (hits != 1)
            throw InputError("abstraction cases must hold exactly once in every state; " +
                             std::to_string(hits) + " hold in " + sub.describe(s));
    }
    return classification(sub.size(), class_of, cases.size());
}

} // namespace

Abstraction parse_abstraction(const std::string& spec, const StateSpace& space, std::size_t labels) {
    struct Item {
        std::vector<std::size_t> vars;
        std::string kind;
    };
    std::map<std::size_t, Item> byFirstVar;
    std::optional<std::string> labelKind;

    for (const auto& raw : split_top(spec, ';')) {
        if (raw.empty()) continue;
        const auto colon = raw.find(':');
        if (colon == std::string::npos) throw InputError("expected vars:kind in abstraction item '" + raw + "'");
        const std::string names = trim(raw.substr(0, colon));
        const std::string kind = trim(raw.substr(colon + 1));
        if (names == "@") {
            if (labels == 0) throw InputError("abstraction has no label factor");
            labelKind = kind;
            continue;
        }
        Item item{{}, kind};
        for (const auto& n : split_top(names, ',')) {
            std::size_t k = 0;
            while (k < space.var_count() && space.vars()[k].name != n) ++k;
            if (k == space.var_count()) throw InputError("unknown variable '" + n + "' in abstraction");
            if (!item.vars.empty() && k != item.vars.back() + 1)
                throw InputError("abstraction groups must list consecutive variables in declaration order");
            item.vars.push_back(k);
        }
        if (byFirstVar.count(item.vars.front())) throw InputError("variable '" + names + "' abstracted twice");
        byFirstVar[item.vars.front()] = std::move(item);
    }

    std::vector<SparseMatrix> factors;
    std::size_t k = 0;
    while (k < space.var_count()) {
        auto it = byFirstVar.find(k);
        if (it == byFirstVar.end()) {
            factors.push_back(SparseMatrix::identity(space.domain_size(k)));
            ++k;
            continue;
        }
        const Item& item = it->second;
        std::vector<VarDecl> group;
        std::size_t dim = 1;
        for (std::size_t v : item.vars) {
            group.push_back(space.vars()[v]);
            dim *= space.domain_size(v);
        }
        if (item.kind == "id") {
            factors.push_back(SparseMatrix::identity(dim));
        } else if (item.kind == "forget") {
            factors.push_back(forgetful(dim));
        } else if (auto body = bracket_body(item.kind, "classes")) {
            if (group.size() != 1) throw InputError("classes[...] applies to a single variable");
            factors.push_back(classes_factor(group.front(), *body));
        } else if (auto cbody = bracket_body(item.kind, "cases")) {
            factors.push_back(cases_factor(group, *cbody));
        } else {
            throw InputError("unknown abstraction kind '" + item.kind + "'");
        }
        for (std::size_t v : item.vars)
            if (v != k++) throw InputError("overlapping abstraction groups");
    }
    if (labels > 0) {
        const std::string kind = labelKind.value_or("forget");
        if (kind == "id") factors.push_back(SparseMatrix::identity(labels));
        else if (kind == "forget") factors.push_back(forgetful(labels));
        else throw InputError("label factor must be id or forget");
    }
    return Abstraction(std::move(factors));
}

AnalysisResult iterate(const SparseMatrix& t, const StateVector& x0, const IterateOptions& opts) {
    if (t.rows() != t.cols()) throw InputError("iteration needs a square operator");
    if (x0.dim() != t.rows()) throw InputError("initial vector dimension does not match the operator");
    AnalysisResult res;
    StateVector x = x0;
    for (std::size_t step = 0; step <= opts.max_steps; ++step) {
        StateVector next = vec_mat_mul(x, t);
        const double r = (next - x).l1();
        if (r < opts.eps) {
            res.terminal = std::move(next);
            res.steps = step;
            res.residual = r;
            return res;
        }
        x = std::move(next);
    }
    throw ConvergenceError("no fixed point within " + std::to_string(opts.max_steps) +
                           " steps; the program may not terminate almost surely");
}

StateVector initial_config(const LosOperator& los, const StateVector& s0, Label init_label) {
    if (s0.dim() != los.space.size())
        throw InputError("initial state has dimension " + std::to_string(s0.dim()) + ", expected " +
                         std::to_string(los.space.size()));
    if (init_label < 1 || init_label > los.labels) throw InputError("initial label out of range");
    return kron(s0, StateVector::unit(los.labels, init_label - 1));
}

StateVector point_state(const StateSpace& space, std::span<const Value> valuation) {
    return StateVector::unit(space.size(), space.index(valuation));
}

StateVector extract_label(const StateVector& x, Label l, std::size_t labels) {
    if (labels == 0 || x.dim() % labels != 0) throw InputError("vector dimension not divisible by label count");
    if (l < 1 || l > labels) throw InputError("label " + std::to_string(l) + " out of range");
    StateVector out(x.dim() / labels);
    for (std::size_t s = 0; s < out.dim(); ++s) out[s] = x[s * labels + (l - 1)];
    return out;
}

StateVector normalized(const StateVector& x) {
    const double m = x.sum();
    if (m <= 0.0) throw InputError("cannot normalise a vector with no mass");
    StateVector out(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) out[i] = x[i] / m;
    return out;
}

StateVector abstract_state(const StateVector& x, const Abstraction& a) {
    return vec_mat_mul(x, a.matrix());
}

SparseMatrix abstract_operator(const SparseMatrix& t, const Abstraction& a) {
    if (a.concrete_dim() != t.rows() || t.rows() != t.cols())
        throw InputError("abstraction of dimension " + std::to_string(a.concrete_dim()) +
                         " does not fit an operator of dimension " + std::to_string(t.rows()));
    return a.pseudo_inverse() * t * a.matrix();
}

} // namespace plos
