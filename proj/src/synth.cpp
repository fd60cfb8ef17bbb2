#include "plos/synth.hpp"

#include "plos/error.hpp"
#include "plos/interp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace plos {

ParamMatrix::ParamMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw InputError("parameter matrix size mismatch");
}

ParamMatrix ParamMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    ParamMatrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw InputError("ragged parameter matrix");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

ParamMatrix ParamMatrix::vertex(std::span<const std::size_t> blocks, std::size_t cols) {
    ParamMatrix m(blocks.size(), cols);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i] < 1 || blocks[i] > cols) throw InputError("block number out of range");
        m(i, blocks[i] - 1) = 1.0;
    }
    return m;
}

bool ParamMatrix::feasible(double tol) const {
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (double v : row(i)) {
            if (v < -tol || v > 1.0 + tol) return false;
            s += v;
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

std::vector<std::size_t> ParamMatrix::argmax_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows_; ++i) {
        auto r = row(i);
        out.push_back(static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()) + 1);
    }
    return out;
}

std::vector<double> project_simplex(std::span<const double> v) {
    if (v.empty()) return {};
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double t = (cumsum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

// ---------------------------------------------------------------- flow-free sketches

FlowFreeSketch FlowFreeSketch::build(std::vector<VarDecl> vars, const std::vector<std::string>& block_sources,
                                     std::size_t steps) {
    if (steps == 0) throw InputError("sketch needs at least one step");
    if (block_sources.empty()) throw InputError("sketch needs a non-empty block library");
    FlowFreeSketch s;
    s.space = StateSpace(std::move(vars));
    s.steps = steps;
    for (const auto& src : block_sources) {
        Stmt b = parse_stmt(src, s.space.vars());
        if (!b.is_atomic()) throw InputError("library entry '" + src + "' is not an atomic block");
        s.ops.push_back(block_semantics(b, s.space).positive);
        s.blocks.push_back(std::move(b));
    }
    return s;
}

SparseMatrix instantiate(const FlowFreeSketch& sketch, const ParamMatrix& lambda) {
    if (lambda.rows() != sketch.steps || lambda.cols() != sketch.library_size())
        throw InputError("parameter matrix must be " + std::to_string(sketch.steps) + "x" +
                         std::to_string(sketch.library_size()));
    if (!lambda.feasible()) throw InputError("infeasible parameter matrix: rows must lie on the simplex");
    const std::size_t n = sketch.space.size();
    SparseMatrix t = SparseMatrix::identity(n);
    for (std::size_t i = 0; i < sketch.steps; ++i) {
        std::vector<Triplet> acc;
        for (std::size_t j = 0; j < sketch.library_size(); ++j) {
            const double w = lambda(i, j);
            if (w == 0.0) continue;
            for (const auto& e : sketch.ops[j].triplets()) acc.push_back({e.row, e.col, w * e.value});
        }
        t = t * SparseMatrix::from_triplets(n, n, std::move(acc));
    }
    return t;
}

AccessDiagonals access_diagonals(const FlowFreeSketch& sketch, const std::string& var) {
    std::size_t k = 0;
    while (k < sketch.space.var_count() && sketch.space.vars()[k].name != var) ++k;
    if (k == sketch.space.var_count()) throw InputError("unknown variable '" + var + "'");
    AccessDiagonals d;
    for (const auto& b : sketch.blocks) {
        std::set<std::size_t> reads;
        bool writes = false;
        if (b.kind == StmtKind::Assign) {
            b.expr.collect_vars(reads);
            writes = b.var == k;
        } else if (b.kind == StmtKind::RandomAssign) {
            writes = b.var == k;
        }
        d.reads.push_back(reads.count(k) ? 1.0 : 0.0);
        d.writes.push_back(writes ? 1.0 : 0.0);
    }
    return d;
}

double matrix_norm(const SparseMatrix& m, NormKind kind) {
    if (kind == NormKind::Frobenius) return frobenius(m);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (const auto& t : m.triplets()) d(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
    if (d.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
    return svd.singularValues()(0);
}

double phi_distance(const SparseMatrix& t, const OperatorObjective& obj) {
    const SparseMatrix abs = abstract_operator(t, obj.abstraction);
    if (abs.rows() != obj.target.rows() || abs.cols() != obj.target.cols())
        throw InputError("abstract operator is " + std::to_string(abs.rows()) + "x" + std::to_string(abs.cols()) +
                         " but the target is " + std::to_string(obj.target.rows()) + "x" +
                         std::to_string(obj.target.cols()));
    return matrix_norm(abs - obj.target, obj.norm);
}

double penalty(const ParamMatrix& lambda, std::span<const double> read_diag, std::span<const double> write_diag,
               double rho, double omega) {
    double r = 0.0;
    double w = 0.0;
    for (std::size_t i = 0; i < lambda.rows(); ++i) {
        for (std::size_t j = 0; j < lambda.cols(); ++j) {
            if (j < read_diag.size()) r += lambda(i, j) * read_diag[j];
            if (j < write_diag.size()) w += lambda(i, j) * write_diag[j];
        }
    }
    return rho * r + omega * w;
}

double phi(const FlowFreeSketch& sketch, const OperatorObjective& obj, const ParamMatrix& lambda) {
    return phi_distance(instantiate(sketch, lambda), obj) +
           penalty(lambda, obj.read_diag, obj.write_diag, obj.rho, obj.omega);
}

// ---------------------------------------------------------------- feasible region

ParameterLayout ParameterLayout::rows(std::size_t rows, std::size_t cols) {
    ParameterLayout l;
    l.size = rows * cols;
    for (std::size_t i = 0; i < rows; ++i) {
        Group g;
        for (std::size_t j = 0; j < cols; ++j) g.indices.push_back(i * cols + j);
        l.groups.push_back(std::move(g));
    }
    return l;
}

void ParameterLayout::project(std::vector<double>& x) const {
    if (x.size() != size) throw InputError("parameter vector has the wrong size");
    for (const auto& g : groups) {
        if (g.simplex) {
            std::vector<double> v;
            for (auto i : g.indices) v.push_back(x[i]);
            const auto p = project_simplex(v);
            for (std::size_t k = 0; k < g.indices.size(); ++k) x[g.indices[k]] = p[k];
        } else {
            for (auto i : g.indices) x[i] = std::clamp(x[i], 0.0, 1.0);
        }
    }
}

bool ParameterLayout::feasible(std::span<const double> x, double tol) const {
    if (x.size() != size) return false;
    for (const auto& g : groups) {
        double s = 0.0;
        for (auto i : g.indices) {
            if (x[i] < -tol || x[i] > 1.0 + tol) return false;
            s += x[i];
        }
        if (g.simplex && std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

std::vector<double> ParameterLayout::random_point(std::uint64_t seed) const {
    SplitMix64 rng(seed);
    std::vector<double> x(size, 0.0);
    for (const auto& g : groups) {
        if (g.simplex) {
            // uniform on the simplex via normalised exponentials
            double s = 0.0;
            for (auto i : g.indices) {
                x[i] = -std::log(1.0 - rng.uniform());
                s += x[i];
            }
            for (auto i : g.indices) x[i] /= s;
        } else {
            for (auto i : g.indices) x[i] = rng.uniform();
        }
    }
    return x;
}

// ---------------------------------------------------------------- optimiser

std::vector<double> gradient_forward(const ObjectiveFn& f, std::span<const double> x, double h) {
    std::vector<double> p(x.begin(), x.end());
    const double f0 = f(p);
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = x[i] + h;
        g[i] = (f(p) - f0) / h;
        p[i] = x[i];
    }
    return g;
}

std::vector<double> gradient_central(const ObjectiveFn& f, std::span<const double> x, double h) {
    std::vector<double> p(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = x[i] + h;
        const double up = f(p);
        p[i] = x[i] - h;
        const double down = f(p);
        g[i] = (up - down) / (2.0 * h);
        p[i] = x[i];
    }
    return g;
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-14;
constexpr double kMaxStep = 1e4;
constexpr double kStationary = 1e-12;

struct Descent {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    bool stationary = false;
};

Descent descend(const ObjectiveFn& f, const ParameterLayout& layout, std::vector<double> x, const OptConfig& cfg,
                std::size_t start, std::vector<TraceEntry>& trace) {
    Descent d;
    // An infeasible start enters the region by one unchecked projected step
    // taken from where it is; its own value is not comparable to feasible ones.
    if (!layout.feasible(x)) {
        const auto g = gradient_forward(f, x);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= cfg.initial_step * g[i];
    }
    layout.project(x);
    double fx = f(x);
    trace.push_back({start, 0, fx});
    double alpha = cfg.initial_step;
    std::vector<double> y(x.size());
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        if (cfg.stop_at_tol && fx <= cfg.tol) break;
        const auto g = gradient_forward(f, x);
        double a = alpha;
        bool accepted = false;
        double fy = fx;
        double moved = 0.0;
        while (a >= kMinStep) {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - a * g[i];
            layout.project(y);
            double slope = 0.0;
            moved = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                slope += g[i] * (y[i] - x[i]);
                moved = std::max(moved, std::abs(y[i] - x[i]));
            }
            // the projection arc is pinned at x: no feasible descent
            if (moved == 0.0) break;
            fy = f(y);
            if (fy <= fx + kArmijo * slope) {
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if (!accepted) {
            d.stationary = true;
            break;
        }
        x = y;
        fx = fy;
        d.iterations = it;
        trace.push_back({start, it, fx});
        alpha = std::min(a * cfg.step_growth, kMaxStep);
        if (moved < kStationary) {
            d.stationary = true;
            break;
        }
    }
    d.x = std::move(x);
    d.value = fx;
    return d;
}

} // namespace

OptResult minimize(const ObjectiveFn& f, const ParameterLayout& layout, std::vector<double> x0,
                   const OptConfig& cfg) {
    if (x0.size() != layout.size) throw InputError("initial parameter vector has the wrong size");
    OptResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool bestStationary = false;
    SplitMix64 seeds(cfg.seed);
    for (std::size_t start = 0; start <= cfg.restarts; ++start) {
        std::vector<double> x = start == 0 ? x0 : layout.random_point(seeds.next());
        Descent d = descend(f, layout, std::move(x), cfg, start, best.trace);
        best.iterations += d.iterations;
        best.restarts_used = start;
        if (d.value < best.value) {
            best.value = d.value;
            best.x = std::move(d.x);
            bestStationary = d.stationary;
        }
        if (cfg.stop_at_tol && best.value <= cfg.tol) break;
    }
    best.converged = cfg.stop_at_tol ? best.value <= cfg.tol : bestStationary;
    return best;
}

SketchResult optimize(const FlowFreeSketch& sketch, const OperatorObjective& obj, const ParamMatrix& lambda0,
                      const OptConfig& cfg) {
    if (lambda0.rows() != sketch.steps || lambda0.cols() != sketch.library_size())
        throw InputError("initial parameter matrix must be " + std::to_string(sketch.steps) + "x" +
                         std::to_string(sketch.library_size()));
    const std::size_t rows = sketch.steps;
    const std::size_t cols = sketch.library_size();
    const std::size_t n = sketch.space.size();

    // The objective is evaluated off the simplex by the finite differences,
    // so this path composes the mixtures without the feasibility check.
    ObjectiveFn f = [&](std::span<const double> x) {
        SparseMatrix t = SparseMatrix::identity(n);
        for (std::size_t i = 0; i < rows; ++i) {
            std::vector<Triplet> acc;
            for (std::size_t j = 0; j < cols; ++j) {
                const double w = x[i * cols + j];
                if (w == 0.0) continue;
                for (const auto& e : sketch.ops[j].triplets()) acc.push_back({e.row, e.col, w * e.value});
            }
            t = t * SparseMatrix::from_triplets(n, n, std::move(acc));
        }
        const ParamMatrix lambda(rows, cols, std::vector<double>(x.begin(), x.end()));
        return phi_distance(t, obj) + penalty(lambda, obj.read_diag, obj.write_diag, obj.rho, obj.omega);
    };
    SketchResult r;
    r.opt = minimize(f, ParameterLayout::rows(rows, cols), lambda0.flat(), cfg);
    r.lambda = ParamMatrix(rows, cols, r.opt.x);
    return r;
}

namespace {

void relabel(Stmt& s, Label& next) {
    if (s.kind != StmtKind::Seq) s.label = next++;
    for (auto& c : s.body) relabel(c, next);
}

} // namespace

Program extract_program(const FlowFreeSketch& sketch, const ParamMatrix& lambda, double threshold,
                        double min_weight) {
    if (!lambda.feasible()) throw InputError("infeasible parameter matrix");
    std::vector<Stmt> steps;
    for (std::size_t i = 0; i < lambda.rows(); ++i) {
        auto row = lambda.row(i);
        const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        std::vector<std::size_t> kept;
        for (std::size_t j = 0; j < row.size(); ++j)
            if (row[j] >= min_weight) kept.push_back(j);
        if (row[top] >= threshold || kept.size() < 2) {
            steps.push_back(sketch.blocks[top]);
            continue;
        }
        double mass = 0.0;
        for (auto j : kept) mass += row[j];
        Stmt c;
        c.kind = StmtKind::Choose;
        for (auto j : kept) {
            c.probs.push_back(ProbExpr::literal(row[j] / mass));
            c.body.push_back(sketch.blocks[j]);
        }
        steps.push_back(std::move(c));
    }
    Program p;
    p.decls = sketch.space.vars();
    if (steps.size() == 1) {
        p.body = std::move(steps.front());
    } else {
        p.body.kind = StmtKind::Seq;
        p.body.body = std::move(steps);
    }
    Label next = 1;
    relabel(p.body, next);
    p.init_label = init(p.body);
    p.stop_label = next;
    return p;
}

// ---------------------------------------------------------------- flow-embedded sketches

ParametricProgram ParametricProgram::from(Program p) {
    ParametricProgram pp;
    pp.names = p.parameters();
    pp.layout.size = pp.names.size();
    auto index_of = [&](const std::string& n) {
        return static_cast<std::size_t>(std::find(pp.names.begin(), pp.names.end(), n) - pp.names.begin());
    };
    std::set<std::size_t> grouped;
    std::function<void(const Stmt&)> walk = [&](const Stmt& s) {
        if (s.kind == StmtKind::Choose) {
            std::vector<std::size_t> idx;
            bool bare = true;
            for (const auto& pr : s.probs) {
                auto name = pr.bare_parameter();
                if (!name) {
                    bare = false;
                    break;
                }
                idx.push_back(index_of(*name));
            }
            std::set<std::size_t> distinct(idx.begin(), idx.end());
            const bool fresh = std::none_of(idx.begin(), idx.end(), [&](std::size_t i) { return grouped.count(i); });
            if (bare && distinct.size() == idx.size() && fresh) {
                pp.layout.groups.push_back({true, idx});
                grouped.insert(idx.begin(), idx.end());
            }
        }
        for (const auto& c : s.body) walk(c);
    };
    walk(p.body);
    for (std::size_t i = 0; i < pp.names.size(); ++i)
        if (!grouped.count(i)) pp.layout.groups.push_back({false, {i}});
    pp.program = std::move(p);
    return pp;
}

Bindings ParametricProgram::bind(std::span<const double> x) const {
    if (x.size() != names.size()) throw InputError("expected " + std::to_string(names.size()) + " parameter values");
    Bindings b;
    for (std::size_t i = 0; i < names.size(); ++i) b[names[i]] = x[i];
    return b;
}

double terminal_value(const ParametricProgram& sketch, const TerminalObjective& obj, std::span<const double> x) {
    AssembleOptions opts;
    opts.bindings = sketch.bind(x);
    const LosOperator los = assemble(sketch.program, opts);
    const StateVector x0 = initial_config(los, obj.s0, sketch.program.init_label);
    const AnalysisResult res = iterate(los.T, x0, obj.iterate);
    const StateVector abs = abstract_state(res.terminal, obj.abstraction);
    if (obj.coordinate >= abs.dim()) throw InputError("objective coordinate out of range");
    return abs[obj.coordinate];
}

OptResult optimize(const ParametricProgram& sketch, const TerminalObjective& obj, std::vector<double> x0,
                   const OptConfig& cfg) {
    const double sign = obj.maximize ? -1.0 : 1.0;
    ObjectiveFn f = [&](std::span<const double> x) {
        // finite differences may step just outside [0,1]; evaluate at the clamped point
        std::vector<double> p(x.begin(), x.end());
        sketch.layout.project(p);
        return sign * terminal_value(sketch, obj, p);
    };
    OptResult r = minimize(f, sketch.layout, std::move(x0), cfg);
    r.value *= sign;
    for (auto& t : r.trace) t.value *= sign;
    return r;
}

std::vector<SweepPoint> sweep(const ParametricProgram& sketch, const TerminalObjective& obj,
                              std::span<const double> grid) {
    if (sketch.names.size() != 1)
        throw InputError("sweep needs exactly one parameter, found " + std::to_string(sketch.names.size()));
    std::vector<SweepPoint> out;
    for (double p : grid) {
        if (p < 0.0 || p > 1.0) throw InputError("grid point " + format_number(p) + " outside [0,1]");
        const double x[1] = {p};
        out.push_back({p, terminal_value(sketch, obj, x)});
    }
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.empty()) return out;
    auto num = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw InputError("");
            return v;
        } catch (const std::exception&) {
            throw InputError("bad grid value '" + s + "'");
        }
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::istringstream is(text);
        std::string item;
        while (std::getline(is, item, ':')) parts.push_back(item);
        if (parts.size() != 3) throw InputError("grid range must be start:step:stop");
        const double a = num(parts[0]);
        const double step = num(parts[1]);
        const double b = num(parts[2]);
        if (step <= 0.0 || b < a) throw InputError("grid range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) {
            // snap to 12 decimals so 0:0.1:1 yields 0.3 rather than 0.30000000000000004
            const double v = std::round((a + static_cast<double>(i) * step) * 1e12) / 1e12;
            out.push_back(std::min(b, v));
        }
        return out;
    }
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(num(item));
    return out;
}

} // namespace plos
