// chip: command-line front end for simulation, fitting, evaluation,
// experiments and data ingestion.

#include <chip/experiments.hpp>
#include <chip/ingest.hpp>
#include <chip/likelihood_eval.hpp>
#include <chip/report.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
    std::string k{"auto"};
    std::uint64_t seed{1};
    std::string out;
    std::string matrix{"weighted"};
    std::string mode{"directed"};
};

void add_model_flags(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "master seed")->capture_default_str();
    app->add_option("--matrix", c.matrix, "adjacency used for clustering")
        ->check(CLI::IsMember({"weighted", "binary"}))
        ->capture_default_str();
    app->add_option("--mode", c.mode, "treat events as directed or undirected")
        ->check(CLI::IsMember({"directed", "undirected"}))
        ->capture_default_str();
}

chip::FitOptions fit_options(const Common& c) {
    chip::FitOptions o;
    o.matrix = c.matrix == "binary" ? chip::MatrixKind::binary : chip::MatrixKind::weighted;
    o.mode = c.mode == "undirected" ? chip::Mode::undirected : chip::Mode::directed;
    o.spectral.seed = chip::derive_seed(c.seed, {1});
    o.spectral.svd.seed = chip::derive_seed(c.seed, {2});
    return o;
}

std::optional<std::size_t> parse_k(const std::string& k) {
    if (k == "auto") return std::nullopt;
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(k, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != k.size() || v < 1) throw chip::DomainError("--k must be a positive integer or 'auto'");
    return static_cast<std::size_t>(v);
}

struct InputFlags {
    std::string path;
    bool normalize{false};
    std::optional<double> horizon;
};

void add_input_flags(CLI::App* app, InputFlags& in) {
    app->add_option("input", in.path, "event CSV with header sender,receiver,timestamp")->required();
    app->add_flag("--normalize", in.normalize, "map times onto [0, 1000] before use");
    app->add_option("--horizon", in.horizon, "observation window end (default: last event time)");
}

chip::IngestReport load(const InputFlags& in) {
    chip::IngestOptions o;
    o.normalize = in.normalize;
    o.horizon = in.horizon;
    return chip::ingest_file(in.path, o);
}

// Writes to `path`, or stdout when empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw chip::DomainError("cannot write '" + path + "'");
    write(f);
}

std::string three_sig(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::size_t choose_k(const chip::PairEvents& pairs, const std::optional<std::size_t>& k, const chip::FitOptions& o) {
    if (k) return *k;
    const auto mats = chip::build_matrices(pairs, o.mode);
    const auto& m = o.matrix == chip::MatrixKind::weighted ? mats.counts.values : mats.binary.values;
    const std::size_t k_max = std::min<std::size_t>(10, pairs.num_nodes());
    if (k_max < 2) return 1;
    const auto gap = chip::eigengap_select_k(m, k_max, o.spectral.svd);
    std::cerr << "k chosen by eigengap: " << gap.k << '\n';
    return gap.k;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CHIP: community Hawkes independent pairs model"};
    app.require_subcommand(1);

    // simulate
    Common sim_c;
    std::size_t sim_n = 100, sim_k = 2;
    double sim_t = 100, mu1 = 0.1, mu2 = 0.05, alpha1 = 0.5, alpha2 = 0.5, beta1 = 1, beta2 = 1;
    std::string labels_out;
    auto* sim = app.add_subcommand("simulate", "simulate a network from the two-parameter model");
    sim->add_option("--n", sim_n, "nodes")->capture_default_str();
    sim->add_option("--k", sim_k, "blocks (assigned round-robin)")->capture_default_str();
    sim->add_option("--T", sim_t, "horizon")->capture_default_str();
    sim->add_option("--mu1", mu1)->capture_default_str();
    sim->add_option("--mu2", mu2)->capture_default_str();
    sim->add_option("--alpha1", alpha1)->capture_default_str();
    sim->add_option("--alpha2", alpha2)->capture_default_str();
    sim->add_option("--beta1", beta1)->capture_default_str();
    sim->add_option("--beta2", beta2)->capture_default_str();
    sim->add_option("--seed", sim_c.seed)->capture_default_str();
    sim->add_option("--out", sim_c.out, "event CSV (default stdout)");
    sim->add_option("--labels-out", labels_out, "planted labels as node,label CSV");

    // cluster
    Common cl_c;
    InputFlags cl_in;
    auto* cl = app.add_subcommand("cluster", "spectral clustering of an event log");
    add_input_flags(cl, cl_in);
    cl->add_option("--k", cl_c.k, "blocks or 'auto' for the eigengap choice")->capture_default_str();
    add_model_flags(cl, cl_c);
    cl->add_option("--out", cl_c.out, "node,label CSV (default stdout)");

    // fit
    Common fit_c;
    InputFlags fit_in;
    auto* fit = app.add_subcommand("fit", "fit CHIP to an event log");
    add_input_flags(fit, fit_in);
    fit->add_option("--k", fit_c.k, "blocks or 'auto'")->capture_default_str();
    add_model_flags(fit, fit_c);
    fit->add_option("--out", fit_c.out, "fit JSON (default stdout)");

    // eval
    Common ev_c;
    InputFlags ev_in;
    std::optional<std::size_t> test_count;
    double test_fraction = 0.2;
    std::string dataset;
    bool full_report = false;
    auto* ev = app.add_subcommand("eval", "held-out test log-likelihood of CHIP and the Poisson baseline");
    add_input_flags(ev, ev_in);
    ev->add_option("--k", ev_c.k, "blocks or 'auto'")->capture_default_str();
    add_model_flags(ev, ev_c);
    auto* count_opt = ev->add_option("--test-count", test_count, "number of final events held out");
    ev->add_option("--test-fraction", test_fraction, "fraction of final events held out")
        ->excludes(count_opt)
        ->capture_default_str();
    ev->add_option("--dataset", dataset, "name recorded in the output (default: file name)");
    ev->add_flag("--report", full_report, "emit the full report: parameters, singular values, intervals");
    ev->add_option("--out", ev_c.out, "JSON (default stdout)");

    // experiment
    std::string exp_id, exp_config, exp_grid, exp_out = "results";
    std::optional<std::size_t> exp_reps;
    std::optional<std::uint64_t> exp_seed;
    bool exp_list = false;
    auto* ex = app.add_subcommand("experiment", "run a simulation study");
    ex->add_option("id", exp_id, "experiment id");
    ex->add_option("--config", exp_config, "JSON config file");
    ex->add_option("--grid", exp_grid, "grid overrides, e.g. \"n=128,256;T=400\"");
    ex->add_option("--replicates", exp_reps, "replicates per grid point");
    ex->add_option("--seed", exp_seed, "master seed");
    ex->add_option("--out", exp_out, "output directory")->capture_default_str();
    ex->add_flag("--list", exp_list, "list experiments and exit");

    // ingest
    std::string ing_path, ing_out, tokens_out;
    bool lcc = false;
    auto* ing = app.add_subcommand("ingest", "clean a raw event CSV: dense ids, no self-edges, times on [0, 1000]");
    ing->add_option("input", ing_path)->required();
    ing->add_option("--out", ing_out, "cleaned CSV (default stdout)");
    ing->add_option("--tokens-out", tokens_out, "id,token CSV mapping new ids to input tokens");
    ing->add_flag("--lcc", lcc, "keep only the largest connected component");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const chip::SimplifiedSpec s{sim_n, sim_k, mu1, alpha1, beta1, mu2, alpha2, beta2, sim_t};
            const auto spec = chip::expand_simplified(s);
            const auto truth = chip::round_robin_assignment(sim_n, sim_k);
            const auto log = chip::sample_network(spec, truth, sim_c.seed);
            emit(sim_c.out, [&](std::ostream& o) { chip::write_csv(o, log); });
            if (!labels_out.empty())
                emit(labels_out, [&](std::ostream& o) {
                    o << "node,label\n";
                    for (std::size_t i = 0; i < truth.labels.size(); ++i) o << i + 1 << ',' << truth.labels[i] + 1 << '\n';
                });
            std::cerr << log.size() << " events on " << sim_n << " nodes\n";
        } else if (*cl) {
            const auto data = load(cl_in);
            const auto opt = fit_options(cl_c);
            const chip::PairEvents pairs(data.log);
            const std::size_t k = choose_k(pairs, parse_k(cl_c.k), opt);
            const auto c = chip::detect_communities(pairs, k, opt);
            emit(cl_c.out, [&](std::ostream& o) {
                o << "node,label\n";
                for (std::size_t i = 0; i < c.labels.size(); ++i) o << data.tokens[i] << ',' << c.labels[i] + 1 << '\n';
            });
        } else if (*fit) {
            const auto data = load(fit_in);
            const auto opt = fit_options(fit_c);
            const chip::PairEvents pairs(data.log);
            const std::size_t k = choose_k(pairs, parse_k(fit_c.k), opt);
            const auto f = chip::fit_chip(pairs, k, opt);
            chip::Json j = chip::fit_json(f.params);
            emit(fit_c.out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
        } else if (*ev) {
            const auto data = load(ev_in);
            if (dataset.empty()) dataset = std::filesystem::path(ev_in.path).stem().string();
            chip::RealFitOptions opt;
            opt.k = parse_k(ev_c.k);
            opt.fit = fit_options(ev_c);
            opt.split.test_count = test_count;
            opt.split.test_fraction = test_fraction;
            const auto rep = chip::fit_real(data.log, opt);
            std::cerr << dataset << " k=" << rep.k << ": CHIP " << three_sig(rep.eval.chip_ll_per_event)
                      << ", Poisson " << three_sig(rep.eval.poisson_ll_per_event) << " test log-likelihood per event\n";
            const chip::Json j = full_report ? chip::report_json(dataset, rep, ev_c.seed, opt.theta)
                                             : chip::eval_json(dataset, rep.k, rep.eval, ev_c.seed);
            emit(ev_c.out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
        } else if (*ex) {
            if (exp_list) {
                for (const auto& d : chip::experiment_registry()) std::cout << d.id << "\t" << d.description << '\n';
                return 0;
            }
            chip::ExperimentConfig cfg;
            if (!exp_config.empty()) {
                std::ifstream f(exp_config);
                if (!f) throw chip::DomainError("cannot open config '" + exp_config + "'");
                cfg = chip::config_from_json(nlohmann::json::parse(f));
                if (!exp_id.empty() && exp_id != cfg.id) throw chip::DomainError("experiment id differs from the config");
            } else {
                if (exp_id.empty()) throw chip::DomainError("give an experiment id or --config");
                cfg = chip::default_config(exp_id);
            }
            if (!exp_grid.empty()) chip::apply_grid_override(cfg, exp_grid);
            if (exp_reps) cfg.replicates = *exp_reps;
            if (exp_seed) cfg.seed = *exp_seed;
            chip::validate(cfg);
            const auto res = chip::run_experiment(cfg);
            for (const auto& p : chip::write_outputs(res, exp_out)) std::cerr << "wrote " << p.string() << '\n';
        } else if (*ing) {
            chip::IngestOptions o;
            o.largest_component = lcc;
            const auto rep = chip::ingest_file(ing_path, o);
            emit(ing_out, [&](std::ostream& out) { chip::write_csv(out, rep.log); });
            if (!tokens_out.empty())
                emit(tokens_out, [&](std::ostream& out) {
                    out << "id,token\n";
                    for (std::size_t i = 0; i < rep.tokens.size(); ++i) out << i + 1 << ',' << rep.tokens[i] << '\n';
                });
            std::cerr << rep.rows << " rows, " << rep.self_edges_dropped << " self-edges dropped, " << rep.ties_perturbed
                      << " tied times separated";
            if (lcc)
                std::cerr << ", " << rep.component_nodes_dropped << " nodes and " << rep.component_events_dropped
                          << " events outside the largest component";
            std::cerr << "; " << rep.log.size() << " events on " << rep.log.num_nodes << " nodes\n";
        }
    } catch (const chip::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
