// plos: compile, analyse, simulate and synthesise probabilistic while programs.
//
// Exit codes: 0 ok, 1 input error, 2 numeric non-convergence, 3 budget exhausted.

#include "plos/analysis.hpp"
#include "plos/error.hpp"
#include "plos/interp.hpp"
#include "plos/lang.hpp"
#include "plos/los.hpp"
#include "plos/matrix_io.hpp"
#include "plos/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace plos;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNoConvergence = 2;
constexpr int kBudget = 3;

const char* kConfigConvention =
    "# configuration index = state * L + label (printed 1-based); states enumerate valuations "
    "lexicographically in declaration order, first variable slowest; label is the last tensor factor";
const char* kStateConvention =
    "# state index printed 1-based; valuations enumerate lexicographically in declaration order, "
    "first variable slowest";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read '" + p.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Output files are staged in memory and written only once every
// computation has succeeded, so a failing command leaves nothing behind.
struct Outputs {
    fs::path dir;
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
    void flush() const {
        fs::create_directories(dir);
        for (const auto& [name, content] : files) {
            std::ofstream out(dir / name, std::ios::binary);
            if (!out) throw InputError("cannot write '" + (dir / name).string() + "'");
            out << content;
            std::cout << "wrote " << (dir / name).string() << "\n";
        }
    }
};

Bindings parse_bindings(const std::string& text) {
    Bindings b;
    if (text.empty()) return b;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("expected name=value in --bind item '" + item + "'");
        std::string name = item.substr(0, eq);
        if (!name.empty() && name[0] == '#') name.erase(0, 1);
        try {
            b[name] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw InputError("bad value in --bind item '" + item + "'");
        }
    }
    return b;
}

// Default initial state: every variable at the first value of its domain.
Valuation initial_valuation(const StateSpace& space, const std::string& text) {
    if (!text.empty()) return space.parse_valuation(text);
    Valuation v;
    for (const auto& d : space.vars()) v.push_back(d.domain.front());
    return v;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json vars_json(const StateSpace& space) {
    json vars = json::array();
    for (const auto& d : space.vars()) vars.push_back({{"name", d.name}, {"domain", d.domain}});
    return vars;
}

std::string matrix_text(const SparseMatrix& m, const std::string& format) {
    std::ostringstream os;
    if (format == "mm") {
        write_matrix_market(os, m);
    } else if (format == "json") {
        os << to_json(m) << "\n";
    } else {
        os << "# 1-based row,col of nonzero entries\nrow,col,value\n";
        for (const auto& t : m.triplets()) os << t.row + 1 << "," << t.col + 1 << "," << fmt(t.value) << "\n";
    }
    return os.str();
}

std::string extension(const std::string& format) {
    if (format == "mm") return ".mtx";
    if (format == "json") return ".json";
    return ".csv";
}

// ---------------------------------------------------------------- commands

struct Common {
    std::string input;
    std::string outdir = ".";
    std::string format = "mm";
    std::string bind;
    std::string init;
    std::uint64_t seed = 0;
};

int cmd_compile(const Common& c) {
    const Program p = parse(slurp(c.input));
    AssembleOptions opts;
    opts.bindings = parse_bindings(c.bind);
    const LosOperator los = assemble(p, opts);

    const std::string stem = fs::path(c.input).stem().string();
    json meta;
    meta["command"] = "compile";
    meta["input"] = fs::path(c.input).filename().string();
    meta["dim"] = los.dim();
    meta["nnz"] = los.T.nnz();
    meta["density"] = los.T.density();
    meta["states"] = los.space.size();
    meta["labels"] = los.labels;
    meta["init_label"] = p.init_label;
    meta["stop_label"] = p.stop_label;
    meta["variables"] = vars_json(los.space);
    meta["convention"] = std::string(kConfigConvention).substr(2);
    meta["format"] = c.format;

    Outputs out{c.outdir, {}};
    out.add(stem + extension(c.format), matrix_text(los.T, c.format));
    out.add(stem + ".meta.json", meta.dump(2) + "\n");
    std::cout << "dim=" << los.dim() << " nnz=" << los.T.nnz() << " density=" << format_number(los.T.density())
              << "\n";
    out.flush();
    return kOk;
}

int cmd_analyze(const Common& c, const std::string& abstraction, double eps, std::size_t max_steps,
                bool only_stop) {
    const Program p = parse(slurp(c.input));
    AssembleOptions opts;
    opts.bindings = parse_bindings(c.bind);
    const LosOperator los = assemble(p, opts);
    const Valuation s0 = initial_valuation(los.space, c.init);
    const StateVector x0 = initial_config(los, point_state(los.space, s0), p.init_label);
    const AnalysisResult res = iterate(los.T, x0, {eps, max_steps});

    const std::string stem = fs::path(c.input).stem().string();
    Outputs out{c.outdir, {}};

    std::ostringstream term;
    term << kConfigConvention << "\nindex,description,probability\n";
    for (std::size_t i = 0; i < res.terminal.dim(); ++i) {
        if (res.terminal[i] == 0.0) continue;
        if (only_stop && i % los.labels != p.stop_label - 1) continue;
        term << i + 1 << ",\"" << los.describe(i) << "\"," << fmt(res.terminal[i]) << "\n";
    }
    out.add(stem + ".terminal.csv", term.str());

    json meta;
    meta["command"] = "analyze";
    meta["input"] = fs::path(c.input).filename().string();
    meta["initial"] = los.space.describe(los.space.index(s0));
    meta["init_label"] = p.init_label;
    meta["dim"] = los.dim();
    meta["steps"] = res.steps;
    meta["residual"] = res.residual;
    meta["eps"] = eps;
    meta["convention"] = std::string(kConfigConvention).substr(2);

    if (!abstraction.empty()) {
        const Abstraction a = parse_abstraction(abstraction, los.space, los.labels);
        const StateVector abs = abstract_state(res.terminal, a);
        std::ostringstream os;
        os << "# abstract coordinates of x A, printed 1-based in tensor order of the abstraction factors\n"
           << "index,description,probability\n";
        for (std::size_t i = 0; i < abs.dim(); ++i) os << i + 1 << ",\"abstract " << i + 1 << "\"," << fmt(abs[i]) << "\n";
        out.add(stem + ".abstract.csv", os.str());
        meta["abstraction"] = abstraction;
        meta["abstract_dim"] = a.abstract_dim();
        std::cout << "abstract:";
        for (std::size_t i = 0; i < abs.dim(); ++i) std::cout << " " << format_number(abs[i]);
        std::cout << "\n";
    }
    out.add(stem + ".analyze.meta.json", meta.dump(2) + "\n");
    std::cout << "converged in " << res.steps << " steps (residual " << format_number(res.residual) << ")\n";
    out.flush();
    return kOk;
}

int cmd_simulate(const Common& c, std::size_t runs, std::size_t max_steps) {
    const Program p = parse(slurp(c.input));
    const StateSpace space = enumerate(p.decls);
    const Valuation s0 = initial_valuation(space, c.init);
    if (runs == 0) throw InputError("--runs must be at least 1");
    RunConfig cfg;
    cfg.seed = c.seed;
    cfg.samples = runs;
    cfg.max_steps = max_steps;
    cfg.bindings = parse_bindings(c.bind);
    const Estimate est = estimate(p, s0, cfg);

    const std::string stem = fs::path(c.input).stem().string();
    Outputs out{c.outdir, {}};
    std::ostringstream os;
    os << kStateConvention << "\nindex,description,count,frequency\n";
    for (std::size_t s = 0; s < est.counts.size(); ++s) {
        if (est.counts[s] == 0) continue;
        os << s + 1 << ",\"" << space.describe(s) << "\"," << est.counts[s] << ","
           << fmt(static_cast<double>(est.counts[s]) / static_cast<double>(est.runs)) << "\n";
    }
    out.add(stem + ".simulate.csv", os.str());

    json meta;
    meta["command"] = "simulate";
    meta["input"] = fs::path(c.input).filename().string();
    meta["initial"] = space.describe(space.index(s0));
    meta["seed"] = c.seed;
    meta["runs"] = est.runs;
    meta["max_steps"] = max_steps;
    meta["censored"] = est.censored;
    meta["generator"] = "splitmix64, run i draws from substream(seed, i)";
    out.add(stem + ".simulate.meta.json", meta.dump(2) + "\n");
    std::cout << "runs=" << est.runs << " censored=" << est.censored << " support=" << est.support() << "\n";
    out.flush();
    if (est.censored > 0) {
        std::cerr << "plos: " << est.censored << " runs exceeded --max-steps; their mass is reported as censored\n";
        return kBudget;
    }
    return kOk;
}

TerminalObjective terminal_objective(const Program& p, const Common& c, const std::string& abstraction,
                                     std::size_t coordinate, bool maximize, double eps) {
    const StateSpace space = enumerate(p.decls);
    TerminalObjective obj;
    obj.s0 = point_state(space, initial_valuation(space, c.init));
    obj.abstraction = parse_abstraction(abstraction, space, p.label_count());
    if (coordinate < 1 || coordinate > obj.abstraction.abstract_dim())
        throw InputError("--coordinate must lie in 1.." + std::to_string(obj.abstraction.abstract_dim()));
    obj.coordinate = coordinate - 1;
    obj.maximize = maximize;
    obj.iterate.eps = eps;
    return obj;
}

int cmd_sweep(const Common& c, const std::string& grid_text, const std::string& abstraction, std::size_t coordinate,
              double eps) {
    const ParametricProgram sk = ParametricProgram::from(parse(slurp(c.input)));
    const TerminalObjective obj = terminal_objective(sk.program, c, abstraction, coordinate, true, eps);
    const auto grid = parse_grid(grid_text);
    if (grid.empty()) throw InputError("--grid is empty");
    const auto pts = sweep(sk, obj, grid);

    const std::string stem = fs::path(c.input).stem().string();
    Outputs out{c.outdir, {}};
    std::ostringstream os;
    os << "# phi = abstract coordinate " << coordinate << " (1-based) of the terminal configuration vector\n"
       << sk.names.front() << ",phi\n";
    for (const auto& pt : pts) os << fmt(pt.p) << "," << fmt(pt.value) << "\n";
    out.add(stem + ".sweep.csv", os.str());
    json meta;
    meta["command"] = "sweep";
    meta["input"] = fs::path(c.input).filename().string();
    meta["parameter"] = sk.names.front();
    meta["grid"] = grid_text;
    meta["abstraction"] = abstraction;
    meta["coordinate"] = coordinate;
    out.add(stem + ".sweep.meta.json", meta.dump(2) + "\n");
    for (const auto& pt : pts) std::cout << format_number(pt.p) << " " << format_number(pt.value) << "\n";
    out.flush();
    return kOk;
}

std::string trace_csv(const OptResult& r, const char* value_name) {
    std::ostringstream os;
    os << "# accepted iterates; start 0 is the given initial point, later starts are seeded restarts\n"
       << "start,iteration," << value_name << "\n";
    for (const auto& t : r.trace) os << t.start << "," << t.iteration << "," << fmt(t.value) << "\n";
    return os.str();
}

struct SynthFlags {
    std::string objective = "penalized";
    double rho = 1.0;
    double omega = 1.0;
    double tol = 1e-6;
    std::size_t restarts = 20;
    std::size_t max_iter = 500;
    double threshold = 0.99;
    NormKind norm = NormKind::Frobenius;
    std::string abstraction;
    std::size_t coordinate = 1;
    bool minimize = false;
    double eps = 1e-12;
};

int synthesize_flow_free(const Common& c, const SynthFlags& f) {
    const fs::path path(c.input);
    json spec;
    try {
        spec = json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw InputError(std::string("sketch file: ") + e.what());
    }
    std::vector<VarDecl> vars;
    std::vector<std::string> blocks;
    std::size_t steps = 0;
    std::string target_path, abstraction, penalty_var;
    std::optional<ParamMatrix> initial;
    try {
        for (const auto& v : spec.at("vars"))
            vars.push_back({v.at("name").get<std::string>(), v.at("domain").get<std::vector<Value>>()});
        blocks = spec.at("blocks").get<std::vector<std::string>>();
        steps = spec.at("steps").get<std::size_t>();
        target_path = spec.at("target").get<std::string>();
        abstraction = spec.value("abstraction", std::string());
        penalty_var = spec.value("penalty_var", std::string());
        if (spec.contains("initial"))
            initial = ParamMatrix::from_rows(spec.at("initial").get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw InputError(std::string("sketch file: ") + e.what());
    }
    if (!f.abstraction.empty()) abstraction = f.abstraction;

    const FlowFreeSketch sk = FlowFreeSketch::build(vars, blocks, steps);
    OperatorObjective obj;
    fs::path tp(target_path);
    if (tp.is_relative()) tp = path.parent_path() / tp;
    obj.target = load_matrix(tp.string());
    obj.abstraction = parse_abstraction(abstraction, sk.space, 0);
    obj.norm = f.norm;
    if (f.objective == "penalized") {
        if (penalty_var.empty()) throw InputError("penalized objective needs \"penalty_var\" in the sketch file");
        const AccessDiagonals d = access_diagonals(sk, penalty_var);
        obj.read_diag = d.reads;
        obj.write_diag = d.writes;
        obj.rho = f.rho;
        obj.omega = f.omega;
    }
    const ParamMatrix lambda0 =
        initial ? *initial : ParamMatrix(steps, sk.library_size(), 1.0 / static_cast<double>(sk.library_size()));

    OptConfig cfg;
    cfg.tol = f.tol;
    cfg.restarts = f.restarts;
    cfg.seed = c.seed;
    cfg.max_iter = f.max_iter;
    const SketchResult r = optimize(sk, obj, lambda0, cfg);
    const Program prog = extract_program(sk, r.lambda, f.threshold);

    const std::string stem = path.stem().string();
    Outputs out{c.outdir, {}};
    std::ostringstream lam;
    lam << "# lambda*: row i = choice site i, column j = library block j (1-based, file order)\nstep";
    for (std::size_t j = 0; j < sk.library_size(); ++j) lam << ",b" << j + 1;
    lam << "\n";
    for (std::size_t i = 0; i < r.lambda.rows(); ++i) {
        lam << i + 1;
        for (double v : r.lambda.row(i)) lam << "," << fmt(std::abs(v) < 1e-15 ? 0.0 : v);
        lam << "\n";
    }
    out.add(stem + ".lambda.csv", lam.str());
    out.add(stem + ".trace.csv", trace_csv(r.opt, "phi"));
    out.add(stem + ".program.txt", to_source(prog) + "\n");

    json meta;
    meta["command"] = "synthesize";
    meta["input"] = path.filename().string();
    meta["objective"] = f.objective;
    meta["rho"] = obj.rho;
    meta["omega"] = obj.omega;
    meta["norm"] = f.norm == NormKind::Frobenius ? "frobenius" : "spectral";
    meta["seed"] = c.seed;
    meta["tol"] = f.tol;
    meta["restarts_allowed"] = f.restarts;
    meta["restarts_used"] = r.opt.restarts_used;
    meta["iterations"] = r.opt.iterations;
    meta["phi"] = r.opt.value;
    meta["converged"] = r.opt.converged;
    meta["blocks"] = r.lambda.argmax_rows();
    out.add(stem + ".synthesize.meta.json", meta.dump(2) + "\n");

    std::cout << "phi=" << format_number(r.opt.value) << " restarts=" << r.opt.restarts_used
              << " iterations=" << r.opt.iterations << "\n";
    std::cout << to_source(prog.body, prog.decls, {false, false}) << "\n";
    out.flush();
    if (!r.opt.converged) {
        std::cerr << "plos: phi did not reach --tol " << format_number(f.tol) << " within " << f.restarts
                  << " restarts\n";
        return kBudget;
    }
    return kOk;
}

int synthesize_embedded(const Common& c, const SynthFlags& f) {
    const ParametricProgram sk = ParametricProgram::from(parse(slurp(c.input)));
    if (sk.names.empty()) throw InputError("program has no #parameters to synthesise");
    if (f.abstraction.empty()) throw InputError("--abstraction is required for a program sketch");
    const TerminalObjective obj = terminal_objective(sk.program, c, f.abstraction, f.coordinate, !f.minimize, f.eps);

    // Start from the centre of the feasible region.
    std::vector<double> x0(sk.layout.size, 0.5);
    for (const auto& g : sk.layout.groups)
        if (g.simplex)
            for (auto i : g.indices) x0[i] = 1.0 / static_cast<double>(g.indices.size());

    OptConfig cfg;
    cfg.tol = f.tol;
    cfg.restarts = f.restarts;
    cfg.seed = c.seed;
    cfg.max_iter = f.max_iter;
    cfg.stop_at_tol = false;
    const OptResult r = optimize(sk, obj, x0, cfg);

    const std::string stem = fs::path(c.input).stem().string();
    Outputs out{c.outdir, {}};
    std::ostringstream lam;
    lam << "# optimal parameter values\nparameter,value\n";
    for (std::size_t i = 0; i < sk.names.size(); ++i) lam << sk.names[i] << "," << fmt(r.x[i]) << "\n";
    out.add(stem + ".lambda.csv", lam.str());
    out.add(stem + ".trace.csv", trace_csv(r, "phi"));

    json meta;
    meta["command"] = "synthesize";
    meta["input"] = fs::path(c.input).filename().string();
    meta["goal"] = f.minimize ? "minimize" : "maximize";
    meta["abstraction"] = f.abstraction;
    meta["coordinate"] = f.coordinate;
    meta["seed"] = c.seed;
    meta["restarts_allowed"] = f.restarts;
    meta["iterations"] = r.iterations;
    meta["phi"] = r.value;
    meta["stationary"] = r.converged;
    out.add(stem + ".synthesize.meta.json", meta.dump(2) + "\n");

    std::cout << "phi=" << format_number(r.value);
    for (std::size_t i = 0; i < sk.names.size(); ++i) std::cout << " " << sk.names[i] << "=" << format_number(r.x[i]);
    std::cout << "\n";
    out.flush();
    return r.converged ? kOk : kBudget;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"plos: linear operator semantics for probabilistic while programs"};
    app.require_subcommand(1);

    Common common;
    auto shared = [&](CLI::App* sub, bool with_format) {
        sub->add_option("input", common.input, "program or sketch file")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--outdir", common.outdir, "output directory (created if absent)");
        sub->add_option("--bind", common.bind, "parameter values, e.g. p=0.5,q=0.1");
        if (with_format)
            sub->add_option("--format", common.format, "matrix format")->check(CLI::IsMember({"mm", "json", "csv"}));
    };

    auto* compile = app.add_subcommand("compile", "write T(P) and its metadata");
    shared(compile, true);

    std::string abstraction;
    double eps = 1e-12;
    std::size_t max_steps = 1'000'000;
    bool only_stop = false;
    auto* analyze = app.add_subcommand("analyze", "terminal distribution by power iteration");
    shared(analyze, false);
    analyze->add_option("--init", common.init, "initial valuation, e.g. d=0,g=0,o=0 (default: first domain values)");
    analyze->add_option("--abstraction", abstraction, "abstraction spec, e.g. \"d,g:cases[d==g, d!=g]; o:forget\"");
    analyze->add_option("--eps", eps, "l1 residual threshold");
    analyze->add_option("--max-steps", max_steps, "iteration budget");
    analyze->add_flag("--stop-only", only_stop, "list only configurations at the stop label");

    std::size_t runs = 100'000;
    std::size_t sim_steps = 100'000;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the terminal distribution");
    shared(simulate, false);
    simulate->add_option("--init", common.init, "initial valuation");
    simulate->add_option("--runs", runs, "number of runs");
    simulate->add_option("--seed", common.seed, "generator seed");
    simulate->add_option("--max-steps", sim_steps, "steps per run before it is censored");

    SynthFlags sf;
    std::string norm = "frobenius";
    auto* synth = app.add_subcommand("synthesize", "optimise a sketch (.json flow-free spec or program with #params)");
    shared(synth, false);
    synth->add_option("--objective", sf.objective, "flow-free objective")->check(CLI::IsMember({"distance", "penalized"}));
    synth->add_option("--rho", sf.rho, "read penalty weight");
    synth->add_option("--omega", sf.omega, "write penalty weight");
    synth->add_option("--norm", norm, "operator norm")->check(CLI::IsMember({"frobenius", "spectral"}));
    synth->add_option("--tol", sf.tol, "success threshold on phi");
    synth->add_option("--restarts", sf.restarts, "seeded random restarts");
    synth->add_option("--max-iter", sf.max_iter, "iterations per start");
    synth->add_option("--seed", common.seed, "restart seed");
    synth->add_option("--threshold", sf.threshold, "row weight at which a choice becomes a plain block");
    synth->add_option("--abstraction", sf.abstraction, "abstraction spec (overrides the sketch file)");
    synth->add_option("--coordinate", sf.coordinate, "abstract coordinate to optimise (1-based, program sketches)");
    synth->add_flag("--minimize", sf.minimize, "minimise the coordinate instead of maximising it");
    synth->add_option("--init", common.init, "initial valuation (program sketches)");
    synth->add_option("--eps", sf.eps, "l1 residual threshold of the inner iteration");

    std::string grid = "0:0.1:1";
    std::size_t coordinate = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a one-parameter program over a grid");
    shared(sweep_cmd, false);
    sweep_cmd->add_option("--grid", grid, "start:step:stop or a comma list");
    sweep_cmd->add_option("--abstraction", abstraction, "abstraction spec")->required();
    sweep_cmd->add_option("--coordinate", coordinate, "abstract coordinate (1-based)");
    sweep_cmd->add_option("--init", common.init, "initial valuation");
    sweep_cmd->add_option("--eps", eps, "l1 residual threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*compile) return cmd_compile(common);
        if (*analyze) return cmd_analyze(common, abstraction, eps, max_steps, only_stop);
        if (*simulate) return cmd_simulate(common, runs, sim_steps);
        if (*sweep_cmd) return cmd_sweep(common, grid, abstraction, coordinate, eps);
        if (*synth) {
            sf.norm = norm == "spectral" ? NormKind::Spectral : NormKind::Frobenius;
            if (fs::path(common.input).extension() == ".json") return synthesize_flow_free(common, sf);
            return synthesize_embedded(common, sf);
        }
    } catch (const ParseError& e) {
        std::cerr << common.input << ":" << e.what() << "\n";
        return kInputError;
    } catch (const InputError& e) {
        std::cerr << "plos: " << e.what() << "\n";
        return kInputError;
    } catch (const ConvergenceError& e) {
        std::cerr << "plos: " << e.what() << "\n";
        return kNoConvergence;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "plos: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
