#include "plos/los.hpp"

#include "plos/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace plos {

StateSpace::StateSpace(std::vector<VarDecl> vars) : vars_(std::move(vars)) {
    if (vars_.empty()) throw InputError("state space needs at least one variable");
    strides_.assign(vars_.size(), 1);
    size_ = 1;
    for (std::size_t k = vars_.size(); k-- > 0;) {
        if (vars_[k].domain.empty()) throw InputError("empty domain for variable '" + vars_[k].name + "'");
        strides_[k] = size_;
        size_ *= vars_[k].domain.size();
    }
}

std::size_t StateSpace::value_index(std::size_t var, Value v) const {
    const auto& dom = vars_[var].domain;
    auto it = std::find(dom.begin(), dom.end(), v);
    if (it == dom.end())
        throw InputError("value " + std::to_string(v) + " outside domain of '" + vars_[var].name + "'");
    return static_cast<std::size_t>(it - dom.begin());
}

std::size_t StateSpace::index(std::span<const Value> valuation) const {
    if (valuation.size() != vars_.size()) throw InputError("valuation arity mismatch");
    std::size_t idx = 0;
    for (std::size_t k = 0; k < vars_.size(); ++k) idx += value_index(k, valuation[k]) * strides_[k];
    return idx;
}

Valuation StateSpace::valuation(std::size_t index) const {
    if (index >= size_) throw InputError("state index out of range");
    Valuation v(vars_.size());
    for (std::size_t k = 0; k < vars_.size(); ++k) {
        v[k] = vars_[k].domain[(index / strides_[k]) % vars_[k].domain.size()];
    }
    return v;
}

std::string StateSpace::describe(std::size_t index) const {
    const Valuation v = valuation(index);
    std::ostringstream os;
    for (std::size_t k = 0; k < vars_.size(); ++k) os << (k ? "," : "") << vars_[k].name << "=" << v[k];
    return os.str();
}

Valuation StateSpace::parse_valuation(const std::string& text) const {
    Valuation v(vars_.size());
    std::vector<bool> seen(vars_.size(), false);
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("expected name=value in '" + item + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        const std::string name = trim(item.substr(0, eq));
        const std::string value = trim(item.substr(eq + 1));
        std::size_t k = 0;
        while (k < vars_.size() && vars_[k].name != name) ++k;
        if (k == vars_.size()) throw InputError("unknown variable '" + name + "'");
        try {
            v[k] = std::stoll(value);
        } catch (const std::exception&) {
            throw InputError("bad value '" + value + "' for '" + name + "'");
        }
        value_index(k, v[k]);
        seen[k] = true;
    }
    for (std::size_t k = 0; k < vars_.size(); ++k)
        if (!seen[k]) throw InputError("no value given for '" + vars_[k].name + "'");
    return v;
}

StateSpace enumerate(std::span<const VarDecl> decls) {
    return StateSpace(std::vector<VarDecl>(decls.begin(), decls.end()));
}

SparseMatrix update_const(std::size_t var, Value c, const StateSpace& space) {
    if (var >= space.var_count()) throw InputError("variable index out of range");
    const std::size_t n = space.domain_size(var);
    const std::size_t col = space.value_index(var, c);
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < n; ++r) t.push_back({r, col, 1.0});
    std::vector<SparseMatrix> factors;
    for (std::size_t k = 0; k < space.var_count(); ++k)
        factors.push_back(k == var ? SparseMatrix::from_triplets(n, n, std::move(t))
                                   : SparseMatrix::identity(space.domain_size(k)));
    return kron_all(factors);
}

SparseMatrix test(const Expr& cond, const StateSpace& space) {
    std::vector<double> diag(space.size(), 0.0);
    for (std::size_t s = 0; s < space.size(); ++s) diag[s] = cond.holds(space.valuation(s)) ? 1.0 : 0.0;
    return SparseMatrix::diagonal(diag);
}

SparseMatrix update_expr(std::size_t var, const Expr& e, const StateSpace& space) {
    // Partition states by the value e takes, then sum P(e = c) U(x <- c).
    std::map<Value, std::vector<double>> selectors;
    for (std::size_t s = 0; s < space.size(); ++s) {
        const Valuation v = space.valuation(s);
        const Value c = e.eval(v);
        if (!space.vars()[var].contains(c))
            throw InputError("assignment to '" + space.vars()[var].name + "' yields " + std::to_string(c) +
                             ", outside its domain, in state " + space.describe(s));
        auto& sel = selectors[c];
        if (sel.empty()) sel.assign(space.size(), 0.0);
        sel[s] = 1.0;
    }
    SparseMatrix acc(space.size(), space.size());
    for (const auto& [c, sel] : selectors) acc = acc + SparseMatrix::diagonal(sel) * update_const(var, c, space);
    return acc;
}

BlockSemantics block_semantics(const Stmt& block, const StateSpace& space) {
    const SparseMatrix id = SparseMatrix::identity(space.size());
    switch (block.kind) {
    case StmtKind::Skip:
    case StmtKind::Choose:
        return {id, id};
    case StmtKind::Assign:
        return {update_expr(block.var, block.expr, space), id};
    case StmtKind::RandomAssign: {
        SparseMatrix acc(space.size(), space.size());
        for (const auto& [c, p] : block.dist.support) acc = acc + p * update_const(block.var, c, space);
        return {acc, id};
    }
    case StmtKind::If:
    case StmtKind::While: {
        const SparseMatrix holds = test(block.expr, space);
        return {id - holds, holds};
    }
    case StmtKind::Seq:
        break;
    }
    throw InputError("block semantics requested for a sequence");
}

std::string LosOperator::describe(std::size_t config_index) const {
    return space.describe(config_index / labels) + " @" + std::to_string(config_index % labels + 1);
}

LosOperator assemble(const Program& program, const AssembleOptions& opts) {
    LosOperator los;
    los.space = enumerate(program.decls);
    los.labels = program.label_count();
    const std::size_t n = los.space.size();
    const std::size_t L = los.labels;
    if (n != 0 && n * L > opts.max_entries / (n * L))
        throw InputError("state-space blow-up: operator of dimension " + std::to_string(n * L) +
                         " exceeds the configured bound");

    std::map<Label, BlockSemantics> semantics;
    auto block_of = [&](Label l) -> const BlockSemantics& {
        auto it = semantics.find(l);
        if (it != semantics.end()) return it->second;
        const Stmt* b = program.block(l);
        if (!b) throw InputError("flow edge from unknown label " + std::to_string(l));
        return semantics.emplace(l, block_semantics(*b, los.space)).first->second;
    };

    // Check every choose site under the given bindings before summing.
    std::map<Label, double> chooseMass;
    const auto edges = flow(program);
    for (const auto& e : edges) {
        if (!e.weight) continue;
        const double w = e.weight->eval(opts.bindings);
        if (w < -opts.prob_tolerance || w > 1.0 + opts.prob_tolerance)
            throw InputError("choose probability " + format_number(w) + " at label " + std::to_string(e.from) +
                             " outside [0,1]");
        chooseMass[e.from] += w;
    }
    for (const auto& [l, mass] : chooseMass)
        if (std::abs(mass - 1.0) > opts.prob_tolerance)
            throw InputError("choose probabilities at label " + std::to_string(l) + " sum to " +
                             format_number(mass) + ", expected 1");

    const SparseMatrix id = SparseMatrix::identity(n);
    std::vector<Triplet> acc;
    auto add_term = [&](const SparseMatrix& block, double weight, Label from, Label to) {
        const SparseMatrix term = kron(block, matrix_unit(from, to, L), opts.max_entries);
        for (const auto& t : term.triplets()) acc.push_back({t.row, t.col, weight * t.value});
    };
    for (const auto& e : edges) {
        if (e.from == program.stop_label) {
            add_term(id, 1.0, e.from, e.to);
        } else if (e.weight) {
            add_term(id, e.weight->eval(opts.bindings), e.from, e.to);
        } else {
            const BlockSemantics& b = block_of(e.from);
            add_term(e.polarity == Polarity::Plain ? b.positive : b.negative, 1.0, e.from, e.to);
        }
    }
    los.T = SparseMatrix::from_triplets(n * L, n * L, std::move(acc));
    return los;
}

double stochasticity_defect(const SparseMatrix& t) {
    double worst = 0.0;
    for (double s : t.row_sums()) worst = std::max(worst, std::abs(s - 1.0));
    return worst;
}

} // namespace plos
