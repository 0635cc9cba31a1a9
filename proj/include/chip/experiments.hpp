#pragma once

// Simulation studies: a registry of experiments over parameter grids, run with
// per-replicate seeds derived from (master seed, grid index, replicate), and
// written out as tidy CSV tables plus a JSON manifest.

#include <chip/community.hpp>
#include <chip/errors.hpp>
#include <chip/estimation.hpp>
#include <chip/generator.hpp>
#include <chip/metrics.hpp>
#include <chip/parallel.hpp>
#include <chip/random.hpp>
#include <chip/theory.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace chip {

inline constexpr const char* kLibraryVersion = "0.1.0";

using GridAxes = std::vector<std::pair<std::string, std::vector<double>>>;

/// One grid point: axis names with their values, in axis order.
struct GridPoint {
    std::vector<std::string> keys;
    std::vector<double> values;

    double operator[](std::string_view key) const {
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (keys[i] == key) return values[i];
        throw DomainError("grid point has no parameter '" + std::string(key) + "'");
    }
    std::size_t count(std::string_view key) const {
        const double v = (*this)[key];
        if (!(v >= 1.0) || v != std::floor(v)) throw DomainError("parameter '" + std::string(key) + "' must be a positive integer");
        return static_cast<std::size_t>(v);
    }
};

/// One output row of a replicate: categorical labels plus numeric values.
struct Record {
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::pair<std::string, double>> values;
};

struct AggregateRow {
    std::size_t grid_index{0};
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::string> metrics;
    std::vector<double> mean, se;
    std::vector<std::size_t> count;
    std::size_t failed{0};

    double mean_of(std::string_view metric) const {
        for (std::size_t i = 0; i < metrics.size(); ++i)
            if (metrics[i] == metric) return mean[i];
        throw DomainError("aggregate row has no metric '" + std::string(metric) + "'");
    }
    std::string label(std::string_view key) const {
        for (const auto& [k, v] : labels)
            if (k == key) return v;
        return {};
    }
};

struct ExperimentConfig {
    std::string id;
    GridAxes grid;
    std::size_t replicates{20};
    std::uint64_t seed{1};
};

struct ReplicateRow {
    std::size_t grid_index{0};
    std::size_t replicate{0};
    std::uint64_t seed{0};
    Record record;
    std::string error;
};

struct ExtraTable {
    std::string name;  // file suffix
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<GridPoint> points;
    std::vector<ReplicateRow> rows;
    std::vector<AggregateRow> aggregate;
    std::vector<std::pair<std::size_t, Record>> theory;  // (grid index, values)
    std::vector<ExtraTable> extras;

    const AggregateRow& find(std::size_t grid_index, std::string_view label_key = {}, std::string_view label = {}) const {
        for (const auto& r : aggregate)
            if (r.grid_index == grid_index && (label_key.empty() || r.label(label_key) == label)) return r;
        throw DomainError("no aggregate row for the requested cell");
    }
};

struct ExperimentDef {
    std::string id;
    std::string description;
    GridAxes defaults;
    std::size_t default_replicates{20};
    std::function<std::vector<Record>(const GridPoint&, std::uint64_t seed)> replicate;  // null: theory only
    std::function<Record(const GridPoint&)> theory;
    std::function<void(ExperimentResult&)> summarize;
    std::map<std::string, std::string> columns;  // documentation for the manifest
};

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline SimplifiedSpec simplified_from(const GridPoint& p) {
    return {p.count("n"), p.count("k"), p["mu1"], p["alpha1"], p["beta1"], p["mu2"], p["alpha2"], p["beta2"], p["T"]};
}

inline SimplifiedTheoryInputs theory_inputs(const GridPoint& p) {
    return SimplifiedTheoryInputs::from_spec(simplified_from(p));
}

struct SimulatedNetwork {
    CommunityAssignment truth;
    PairEvents pairs;
};

// Balanced planted blocks; the simulation stream is the replicate seed.
inline SimulatedNetwork simulate_network(const SimplifiedSpec& s, std::uint64_t seed) {
    const ChipModelSpec spec = expand_simplified(s);
    SimulatedNetwork net{round_robin_assignment(s.n, s.k), {}};
    net.pairs = to_pair_events(simulate_pairs(spec, net.truth, seed, [](const std::string&) {}));
    return net;
}

inline SpectralOptions spectral_for(std::uint64_t seed) {
    SpectralOptions o;
    o.seed = derive_seed(seed, {1});
    o.svd.seed = derive_seed(seed, {2});
    return o;
}

inline double density(const SparseMatrix& m) {
    const double n = static_cast<double>(m.rows());
    return n > 1.0 ? static_cast<double>(m.nonZeros()) / (n * (n - 1.0)) : 0.0;
}

inline Record bound_record(const GridPoint& p) {
    const auto in = theory_inputs(p);
    const auto bin = binary_bound(in);
    const auto w = weighted_bound(in);
    const auto wc = weighted_bound_comparison(in);
    const auto noise = noise_constants(in);
    Record r;
    r.values = {{"binary_bound", bin.selected().value},
                {"binary_bound_exact", bin.exact.value},
                {"binary_bound_taylor", bin.taylor.value},
                {"binary_taylor_selected", bin.taylor_selected ? 1.0 : 0.0},
                {"binary_infinite", bin.selected().infinite ? 1.0 : 0.0},
                {"binary_flagged", bin.selected().flagged ? 1.0 : 0.0},
                {"weighted_bound", w.value},
                {"weighted_bound_comparison", wc.value},
                {"weighted_infinite", w.infinite ? 1.0 : 0.0},
                {"weighted_flagged", w.flagged ? 1.0 : 0.0},
                {"nu1", in.nu1()},
                {"nu2", in.nu2()},
                {"sigma2_1", in.sigma2_1()},
                {"sigma2_2", in.sigma2_2()},
                {"s", noise.s},
                {"s1", noise.s1},
                {"eigen_binary", population_eigen(in, PopulationMatrix::binary)},
                {"eigen_weighted", population_eigen(in, PopulationMatrix::weighted)}};
    return r;
}

// ARI of directed spectral clustering on A and on N.
inline std::vector<Record> ari_both_matrices(const SimplifiedSpec& s, std::uint64_t seed, bool with_density) {
    const auto net = simulate_network(s, seed);
    const auto mats = build_matrices(net.pairs, Mode::directed);
    const auto opt = spectral_for(seed);
    std::vector<Record> out;
    for (const auto& [name, matrix] : {std::pair<std::string, const SparseMatrix*>{"A", &mats.binary.values},
                                       std::pair<std::string, const SparseMatrix*>{"N", &mats.counts.values}}) {
        Record r;
        r.labels = {{"matrix", name}};
        r.values = {{"ari", adjusted_rand(net.truth, spectral_cluster_directed(*matrix, s.k, opt))}};
        if (with_density) r.values.push_back({"density", density(mats.binary.values)});
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<Record> ari_weighted(const SimplifiedSpec& s, std::uint64_t seed) {
    const auto net = simulate_network(s, seed);
    const auto mats = build_matrices(net.pairs, Mode::directed);
    Record r;
    r.values = {{"ari", adjusted_rand(net.truth, spectral_cluster_directed(mats.counts, s.k, spectral_for(seed)))}};
    return {r};
}

// Squared errors averaged over the k^2 block pairs, after matching estimated
// labels to the planted ones.
inline std::vector<Record> parameter_errors(const SimplifiedSpec& s, std::uint64_t seed) {
    const auto net = simulate_network(s, seed);
    FitOptions opt;
    opt.spectral = spectral_for(seed);
    const ChipFit fit = fit_chip(net.pairs, s.k, opt);
    const auto map = best_label_map(net.truth, fit.assignment);
    const ChipModelSpec truth = expand_simplified(s);
    const auto k = static_cast<Eigen::Index>(s.k);
    double e_mu = 0, e_m = 0, e_alpha = 0, e_beta = 0;
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
            const auto ta = static_cast<Eigen::Index>(map[static_cast<std::size_t>(a)]);
            const auto tb = static_cast<Eigen::Index>(map[static_cast<std::size_t>(b)]);
            const double m_true = truth.alpha(ta, tb) / truth.beta(ta, tb);
            e_mu += std::pow(fit.params.mu(a, b) - truth.mu(ta, tb), 2);
            e_m += std::pow(fit.params.ratio(a, b) - m_true, 2);
            e_alpha += std::pow(fit.params.alpha(a, b) - truth.alpha(ta, tb), 2);
            e_beta += std::pow(fit.params.beta(a, b) - truth.beta(ta, tb), 2);
        }
    const double cells = static_cast<double>(k * k);
    Record r;
    r.values = {{"ari", adjusted_rand(net.truth, fit.assignment)},
                {"mse_mu", e_mu / cells},
                {"mse_m", e_m / cells},
                {"mse_alpha", e_alpha / cells},
                {"mse_beta", e_beta / cells}};
    return {r};
}

// Coverage of the simultaneous intervals with the planted communities.
inline std::vector<Record> interval_coverage(const SimplifiedSpec& s, double theta, std::uint64_t seed) {
    const auto net = simulate_network(s, seed);
    const auto counts = build_matrices(net.pairs, Mode::directed).counts;
    const BlockPairStats stats = block_pair_stats(counts, net.truth);
    const MomentEstimates est = moment_estimates(stats, s.horizon);
    const ChipModelSpec truth = expand_simplified(s);
    const auto m_ci = m_confidence_intervals(stats, est.ratio, theta);
    const auto mu_ci = mu_pairwise_difference_intervals(stats, est.mu, s.horizon, theta);
    double m_hits = 0, mu_hits = 0;
    for (std::size_t idx = 0; idx < m_ci.size(); ++idx) {
        const auto a = static_cast<Eigen::Index>(idx / s.k), b = static_cast<Eigen::Index>(idx % s.k);
        if (m_ci[idx].covers(truth.alpha(a, b) / truth.beta(a, b))) m_hits += 1.0;
    }
    for (const auto& d : mu_ci)
        if (d.interval.covers(truth.mu(d.a, d.b) - truth.mu(d.c, d.d))) mu_hits += 1.0;
    const double m_n = static_cast<double>(m_ci.size()), mu_n = static_cast<double>(mu_ci.size());
    Record r;
    r.values = {{"m_all_covered", m_hits == m_n ? 1.0 : 0.0},
                {"mu_all_covered", mu_hits == mu_n ? 1.0 : 0.0},
                {"m_cover_fraction", m_hits / m_n},
                {"mu_cover_fraction", mu_n > 0 ? mu_hits / mu_n : 1.0}};
    return {r};
}

inline GridAxes simplified_axes(std::vector<double> n, std::vector<double> k, std::vector<double> t, double mu1,
                                double mu2, double alpha1, double alpha2, double beta1, double beta2) {
    return {{"n", std::move(n)},  {"k", std::move(k)},  {"T", std::move(t)},        {"mu1", {mu1}},
            {"mu2", {mu2}},       {"alpha1", {alpha1}}, {"alpha2", {alpha2}},       {"beta1", {beta1}},
            {"beta2", {beta2}}};
}

// Least-squares slope of log(mean MSE) against log(n), reported as a decay rate.
inline void mse_slopes(ExperimentResult& res) {
    ExtraTable t{"slopes", {"parameter", "decay_rate", "points"}, {}};
    for (const char* metric : {"mse_mu", "mse_m", "mse_alpha", "mse_beta"}) {
        std::vector<double> x, y;
        for (const auto& row : res.aggregate) {
            const double v = row.mean_of(metric);
            if (v > 0.0 && std::isfinite(v)) {
                x.push_back(std::log(res.points[row.grid_index]["n"]));
                y.push_back(std::log(v));
            }
        }
        double slope = std::numeric_limits<double>::quiet_NaN();
        if (x.size() >= 2) {
            const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
            const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
            double sxy = 0, sxx = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sxy += (x[i] - mx) * (y[i] - my);
                sxx += (x[i] - mx) * (x[i] - mx);
            }
            slope = sxy / sxx;
        }
        t.rows.push_back({std::string(metric).substr(4), fmt(-slope), std::to_string(x.size())});
    }
    res.extras.push_back(std::move(t));
}

}  // namespace detail

/// The built-in experiments.
inline const std::vector<ExperimentDef>& experiment_registry() {
    using detail::simplified_axes;
    using detail::simplified_from;
    static const std::vector<ExperimentDef> defs = [] {
        std::vector<ExperimentDef> d;
        const std::map<std::string, std::string> ari_cols{{"matrix", "A (binary) or N (counts)"},
                                                          {"ari", "adjusted Rand index against the planted blocks"}};
        d.push_back({"fig2a",
                     "spectral clustering on A vs N when only mu differs between blocks",
                     simplified_axes({64, 128, 256, 512}, {4}, {400}, 0.002, 0.001, 7, 7, 8, 8),
                     20,
                     [](const GridPoint& p, std::uint64_t seed) {
                         return detail::ari_both_matrices(simplified_from(p), seed, false);
                     },
                     detail::bound_record,
                     {},
                     ari_cols});
        d.push_back({"fig2b",
                     "spectral clustering on A vs N when only alpha differs between blocks",
                     simplified_axes({64, 128, 256, 512}, {4}, {400}, 0.001, 0.001, 0.006, 0.001, 0.008, 0.008),
                     20,
                     [](const GridPoint& p, std::uint64_t seed) {
                         return detail::ari_both_matrices(simplified_from(p), seed, false);
                     },
                     detail::bound_record,
                     {},
                     ari_cols});
        const auto heat = [](const GridPoint& p, std::uint64_t seed) {
            return detail::ari_weighted(simplified_from(p), seed);
        };
        const std::map<std::string, std::string> heat_cols{{"ari", "adjusted Rand index of clustering on N"}};
        d.push_back({"heatmap-fixed-n", "ARI on N over T and k with n fixed",
                     simplified_axes({256}, {2, 3, 4, 6}, {16, 32, 64, 128}, 0.085, 0.065, 0.06, 0.06, 0.08, 0.08), 20,
                     heat, {}, {}, heat_cols});
        d.push_back({"heatmap-fixed-t", "ARI on N over n and k with T fixed",
                     simplified_axes({64, 128, 256, 512}, {2, 3, 4, 6}, {64}, 0.085, 0.065, 0.06, 0.06, 0.08, 0.08), 20,
                     heat, {}, {}, heat_cols});
        d.push_back({"heatmap-fixed-k", "ARI on N over n and T with k fixed",
                     simplified_axes({192, 256, 384, 512}, {8}, {48, 96, 192, 384}, 0.085, 0.065, 0.06, 0.06, 0.08, 0.08), 20,
                     heat, {}, {}, heat_cols});
        d.push_back({"fig4",
                     "mean squared error of the fitted parameters against n",
                     simplified_axes({90, 130, 180, 260, 370, 500}, {4}, {10000}, 0.0011, 0.0010, 0.11, 0.09, 0.14, 0.16),
                     30,
                     [](const GridPoint& p, std::uint64_t seed) {
                         return detail::parameter_errors(simplified_from(p), seed);
                     },
                     {},
                     detail::mse_slopes,
                     {{"ari", "adjusted Rand index of clustering on N"},
                      {"mse_mu", "squared error of mu averaged over block pairs"},
                      {"mse_m", "squared error of m = alpha / beta"},
                      {"mse_alpha", "squared error of alpha"},
                      {"mse_beta", "squared error of beta"},
                      {"decay_rate", "minus the log-log slope of mean MSE against n (slopes table)"}}});
        const auto scaled = [](bool both) {
            return [both](const GridPoint& p, std::uint64_t seed) {
                SimplifiedSpec s = simplified_from(p);
                s.mu1 *= p["scale"];
                if (both) s.mu2 *= p["scale"];
                return detail::ari_both_matrices(s, seed, true);
            };
        };
        auto density_cols = ari_cols;
        density_cols["density"] = "fraction of ordered pairs with at least one event";
        density_cols["scale"] = "multiplier applied to mu1 (and mu2 when both are scaled)";
        GridAxes fixed_ratio = simplified_axes({128}, {4}, {50}, 0.075, 0.065, 0.05, 0.05, 0.08, 0.08);
        fixed_ratio.push_back({"scale", {1, 2, 5, 10, 20, 30}});
        d.push_back({"density-fixed-ratio", "ARI on A and N while scaling mu1 and mu2 together", fixed_ratio, 20,
                     scaled(true), {}, {}, density_cols});
        GridAxes sweep = simplified_axes({256}, {4}, {50}, 7.5e-4, 3.5e-4, 0.05, 0.05, 0.08, 0.08);
        sweep.push_back({"scale", {1, 4, 16, 64, 256}});
        d.push_back({"density-sweep", "ARI on A and N with network density, scaling both mu", sweep, 20, scaled(true),
                     {}, {}, density_cols});
        GridAxes diag = simplified_axes({128}, {4}, {50}, 0.075, 0.065, 0.05, 0.05, 0.08, 0.08);
        diag.push_back({"scale", {1, 1.1, 1.2, 1.3, 1.4}});
        d.push_back({"density-increase-mu1", "ARI on A and N while scaling only mu1", diag, 20, scaled(false), {}, {},
                     density_cols});
        GridAxes ci = simplified_axes({128}, {4}, {10000}, 0.0011, 0.0010, 0.11, 0.09, 0.14, 0.16);
        ci.push_back({"theta", {0.05}});
        d.push_back({"ci-coverage",
                     "coverage of the simultaneous intervals for m and mu differences with planted blocks",
                     ci,
                     500,
                     [](const GridPoint& p, std::uint64_t seed) {
                         return detail::interval_coverage(simplified_from(p), p["theta"], seed);
                     },
                     {},
                     {},
                     {{"m_all_covered", "1 when every m interval covers its true value"},
                      {"mu_all_covered", "1 when every mu-difference interval covers its true value"},
                      {"m_cover_fraction", "fraction of m intervals covering"},
                      {"mu_cover_fraction", "fraction of mu-difference intervals covering"}}});
        d.push_back({"bounds",
                     "theoretical misclustering bounds and noise constants over the grid",
                     simplified_axes({64, 128, 256, 512, 1024}, {4}, {400}, 0.002, 0.001, 7, 7, 8, 8),
                     1,
                     {},
                     detail::bound_record,
                     {},
                     {{"binary_bound", "binary-adjacency bound rate (small-muT form when mu1 T <= 0.05)"},
                      {"weighted_bound", "count-matrix bound rate"},
                      {"weighted_bound_comparison", "count-matrix bound with sigma1^2 + sigma2^2"}}});
        return d;
    }();
    return defs;
}

inline const ExperimentDef& find_experiment(const std::string& id) {
    for (const auto& d : experiment_registry())
        if (d.id == id) return d;
    std::string known;
    for (const auto& d : experiment_registry()) known += (known.empty() ? "" : ", ") + d.id;
    throw DomainError("unknown experiment '" + id + "' (known: " + known + ")");
}

inline ExperimentConfig default_config(const std::string& id) {
    const auto& def = find_experiment(id);
    return {def.id, def.defaults, def.default_replicates, 1};
}

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.replicates < 1) throw DomainError("replicate count must be at least 1");
    for (const auto& [key, values] : cfg.grid)
        if (values.empty()) throw DomainError("grid axis '" + key + "' is empty");
}

/// Replaces grid axes from "key=v1,v2;key2=v3". Keys must already exist.
inline void apply_grid_override(ExperimentConfig& cfg, const std::string& spec) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DomainError("grid override '" + item + "' lacks '='");
        const std::string key = item.substr(0, eq);
        std::vector<double> values;
        std::stringstream vs(item.substr(eq + 1));
        std::string v;
        while (std::getline(vs, v, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(v, &used));
                if (used != v.size()) throw std::invalid_argument(v);
            } catch (const std::exception&) {
                throw DomainError("grid override value '" + v + "' for '" + key + "' is not a number");
            }
        }
        if (values.empty()) throw DomainError("grid override for '" + key + "' has no values");
        auto it = std::find_if(cfg.grid.begin(), cfg.grid.end(), [&](const auto& a) { return a.first == key; });
        if (it == cfg.grid.end()) throw DomainError("experiment '" + cfg.id + "' has no parameter '" + key + "'");
        it->second = std::move(values);
    }
}

/// Config file: {"experiment": id, "replicates": r, "seed": s, "grid": {key: [values] or value}}.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.contains("experiment")) throw DomainError("config needs an 'experiment' field");
    ExperimentConfig cfg = default_config(j.at("experiment").get<std::string>());
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("grid")) {
        for (const auto& [key, value] : j.at("grid").items()) {
            auto it = std::find_if(cfg.grid.begin(), cfg.grid.end(), [&](const auto& a) { return a.first == key; });
            if (it == cfg.grid.end()) throw DomainError("experiment '" + cfg.id + "' has no parameter '" + key + "'");
            it->second = value.is_array() ? value.get<std::vector<double>>() : std::vector<double>{value.get<double>()};
        }
    }
    validate(cfg);
    return cfg;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json grid = nlohmann::ordered_json::object();
    for (const auto& [key, values] : cfg.grid) grid[key] = values;
    return {{"experiment", cfg.id}, {"replicates", cfg.replicates}, {"seed", cfg.seed}, {"grid", grid}};
}

/// Cartesian product, first axis slowest.
inline std::vector<GridPoint> expand_grid(const GridAxes& axes) {
    std::vector<GridPoint> out{GridPoint{}};
    for (const auto& [key, values] : axes) {
        std::vector<GridPoint> next;
        for (const auto& p : out)
            for (double v : values) {
                GridPoint q = p;
                q.keys.push_back(key);
                q.values.push_back(v);
                next.push_back(std::move(q));
            }
        out = std::move(next);
    }
    return out;
}

inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t grid_index, std::size_t replicate) {
    return derive_seed(master, {grid_index, replicate});
}

namespace detail {

inline std::vector<AggregateRow> aggregate(const std::vector<ReplicateRow>& rows, std::size_t num_points) {
    std::vector<AggregateRow> out;
    std::vector<std::size_t> failed(num_points, 0);
    for (const auto& r : rows)
        if (!r.error.empty()) ++failed[r.grid_index];
    std::vector<std::vector<std::vector<double>>> samples;
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
            return a.grid_index == r.grid_index && a.labels == r.record.labels;
        });
        if (it == out.end()) {
            out.push_back({r.grid_index, r.record.labels, {}, {}, {}, {}, failed[r.grid_index]});
            samples.emplace_back();
            it = out.end() - 1;
        }
        auto& s = samples[static_cast<std::size_t>(it - out.begin())];
        for (const auto& [name, value] : r.record.values) {
            auto m = std::find(it->metrics.begin(), it->metrics.end(), name);
            if (m == it->metrics.end()) {
                it->metrics.push_back(name);
                s.emplace_back();
                m = it->metrics.end() - 1;
            }
            if (std::isfinite(value)) s[static_cast<std::size_t>(m - it->metrics.begin())].push_back(value);
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& row = out[i];
        for (const auto& xs : samples[i]) {
            const double n = static_cast<double>(xs.size());
            double mean = std::numeric_limits<double>::quiet_NaN(), se = mean;
            if (!xs.empty()) {
                mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
                if (xs.size() > 1) {
                    double ss = 0;
                    for (double x : xs) ss += (x - mean) * (x - mean);
                    se = std::sqrt(ss / (n - 1.0) / n);
                }
            }
            row.mean.push_back(mean);
            row.se.push_back(se);
            row.count.push_back(xs.size());
        }
    }
    // Grid points where every replicate failed still get a row.
    for (std::size_t g = 0; g < num_points; ++g)
        if (failed[g] && std::none_of(out.begin(), out.end(), [&](const auto& a) { return a.grid_index == g; }))
            out.push_back({g, {}, {}, {}, {}, {}, failed[g]});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.grid_index < b.grid_index; });
    return out;
}

}  // namespace detail

/// Runs every (grid point, replicate) task in parallel. Failures are kept as
/// rows with an error message and the run continues.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const ExperimentDef& def = find_experiment(cfg.id);
    ExperimentResult res;
    res.config = cfg;
    res.points = expand_grid(cfg.grid);
    if (def.theory)
        for (std::size_t g = 0; g < res.points.size(); ++g) res.theory.push_back({g, def.theory(res.points[g])});
    if (def.replicate) {
        const std::size_t tasks = res.points.size() * cfg.replicates;
        std::vector<std::vector<ReplicateRow>> slots(tasks);
        parallel_for(tasks, [&](std::size_t t) {
            const std::size_t g = t / cfg.replicates, r = t % cfg.replicates;
            const std::uint64_t seed = replicate_seed(cfg.seed, g, r);
            try {
                for (auto& rec : def.replicate(res.points[g], seed)) slots[t].push_back({g, r, seed, std::move(rec), {}});
            } catch (const std::exception& e) {
                slots[t].push_back({g, r, seed, {}, e.what()});
            }
        });
        for (auto& s : slots)
            for (auto& row : s) res.rows.push_back(std::move(row));
        res.aggregate = detail::aggregate(res.rows, res.points.size());
    }
    if (def.summarize) def.summarize(res);
    return res;
}

namespace detail {

template <class RowRange, class LabelsOf, class ValuesOf>
std::vector<std::string> union_columns(const RowRange& rows, LabelsOf labels_of, ValuesOf values_of,
                                       std::vector<std::string>& label_cols) {
    std::vector<std::string> value_cols;
    for (const auto& r : rows) {
        for (const auto& [k, v] : labels_of(r))
            if (std::find(label_cols.begin(), label_cols.end(), k) == label_cols.end()) label_cols.push_back(k);
        for (const auto& name : values_of(r))
            if (std::find(value_cols.begin(), value_cols.end(), name) == value_cols.end()) value_cols.push_back(name);
    }
    return value_cols;
}

inline std::string label_value(const std::vector<std::pair<std::string, std::string>>& labels, const std::string& key) {
    for (const auto& [k, v] : labels)
        if (k == key) return v;
    return {};
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
    out << '\n';
}

}  // namespace detail

/// Per-replicate rows: grid values, replicate, seed, labels, values, error.
inline void write_replicates_csv(std::ostream& out, const ExperimentResult& res) {
    std::vector<std::string> label_cols;
    const auto value_cols = detail::union_columns(
        res.rows, [](const ReplicateRow& r) { return r.record.labels; },
        [](const ReplicateRow& r) {
            std::vector<std::string> v;
            for (const auto& p : r.record.values) v.push_back(p.first);
            return v;
        },
        label_cols);
    std::vector<std::string> header;
    for (const auto& [key, values] : res.config.grid) header.push_back(key);
    header.insert(header.end(), {"replicate", "seed"});
    header.insert(header.end(), label_cols.begin(), label_cols.end());
    header.insert(header.end(), value_cols.begin(), value_cols.end());
    header.push_back("error");
    detail::write_row(out, header);
    for (const auto& r : res.rows) {
        std::vector<std::string> f;
        for (double v : res.points[r.grid_index].values) f.push_back(detail::fmt(v));
        f.push_back(std::to_string(r.replicate));
        f.push_back(std::to_string(r.seed));
        for (const auto& c : label_cols) f.push_back(detail::label_value(r.record.labels, c));
        for (const auto& c : value_cols) {
            auto it = std::find_if(r.record.values.begin(), r.record.values.end(), [&](const auto& p) { return p.first == c; });
            f.push_back(it == r.record.values.end() ? "" : detail::fmt(it->second));
        }
        f.push_back(r.error);
        detail::write_row(out, f);
    }
}

/// Aggregates: grid values, labels, <metric>_mean and <metric>_se, replicate counts.
inline void write_aggregate_csv(std::ostream& out, const ExperimentResult& res) {
    std::vector<std::string> label_cols;
    const auto metrics = detail::union_columns(
        res.aggregate, [](const AggregateRow& r) { return r.labels; }, [](const AggregateRow& r) { return r.metrics; },
        label_cols);
    std::vector<std::string> header;
    for (const auto& [key, values] : res.config.grid) header.push_back(key);
    header.insert(header.end(), label_cols.begin(), label_cols.end());
    for (const auto& m : metrics) {
        header.push_back(m + "_mean");
        header.push_back(m + "_se");
    }
    header.insert(header.end(), {"replicates_ok", "replicates_failed"});
    detail::write_row(out, header);
    for (const auto& r : res.aggregate) {
        std::vector<std::string> f;
        for (double v : res.points[r.grid_index].values) f.push_back(detail::fmt(v));
        for (const auto& c : label_cols) f.push_back(detail::label_value(r.labels, c));
        std::size_t ok = 0;
        for (const auto& m : metrics) {
            auto it = std::find(r.metrics.begin(), r.metrics.end(), m);
            if (it == r.metrics.end()) {
                f.insert(f.end(), {"", ""});
                continue;
            }
            const auto i = static_cast<std::size_t>(it - r.metrics.begin());
            f.push_back(detail::fmt(r.mean[i]));
            f.push_back(detail::fmt(r.se[i]));
            ok = std::max(ok, r.count[i]);
        }
        f.push_back(std::to_string(ok));
        f.push_back(std::to_string(r.failed));
        detail::write_row(out, f);
    }
}

inline void write_theory_csv(std::ostream& out, const ExperimentResult& res) {
    std::vector<std::string> header;
    for (const auto& [key, values] : res.config.grid) header.push_back(key);
    std::vector<std::string> cols;
    for (const auto& [g, rec] : res.theory)
        for (const auto& [name, v] : rec.values)
            if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
    header.insert(header.end(), cols.begin(), cols.end());
    detail::write_row(out, header);
    for (const auto& [g, rec] : res.theory) {
        std::vector<std::string> f;
        for (double v : res.points[g].values) f.push_back(detail::fmt(v));
        for (const auto& c : cols) {
            auto it = std::find_if(rec.values.begin(), rec.values.end(), [&](const auto& p) { return p.first == c; });
            f.push_back(it == rec.values.end() ? "" : detail::fmt(it->second));
        }
        detail::write_row(out, f);
    }
}

inline nlohmann::ordered_json manifest(const ExperimentResult& res, const std::vector<std::string>& files) {
    const ExperimentDef& def = find_experiment(res.config.id);
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (const auto& r : res.rows)
        if (seeds.empty() || seeds.back()[0] != r.grid_index || seeds.back()[1] != r.replicate)
            seeds.push_back({r.grid_index, r.replicate, r.seed});
    std::size_t failures = 0;
    for (const auto& r : res.rows) failures += r.error.empty() ? 0 : 1;
    nlohmann::ordered_json columns = nlohmann::ordered_json::object();
    for (const auto& [k, v] : def.columns) columns[k] = v;
    return {{"experiment", def.id},
            {"description", def.description},
            {"config", config_to_json(res.config)},
            {"grid_points", res.points.size()},
            {"failed_replicates", failures},
            {"seed_derivation", "splitmix64 mix of (master seed, grid index, replicate); seeds lists [grid, replicate, seed]"},
            {"seeds", seeds},
            {"columns", columns},
            {"files", files},
            {"versions",
             {{"chip", kLibraryVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                            std::to_string(BOOST_VERSION % 100)}}}};
}

/// Writes <id>.csv (aggregate, or the theory table for theory-only runs),
/// <id>_replicates.csv, <id>_bounds.csv, extra tables, and <id>_manifest.json.
inline std::vector<std::filesystem::path> write_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string id = res.config.id;
    std::vector<std::filesystem::path> written;
    auto open = [&](const std::string& name) {
        written.push_back(dir / name);
        std::ofstream f(written.back(), std::ios::binary);
        if (!f) throw DomainError("cannot write '" + written.back().string() + "'");
        return f;
    };
    const bool theory_only = !find_experiment(id).replicate;
    if (theory_only) {
        auto f = open(id + ".csv");
        write_theory_csv(f, res);
    } else {
        {
            auto f = open(id + ".csv");
            write_aggregate_csv(f, res);
        }
        {
            auto f = open(id + "_replicates.csv");
            write_replicates_csv(f, res);
        }
        if (!res.theory.empty()) {
            auto f = open(id + "_bounds.csv");
            write_theory_csv(f, res);
        }
    }
    for (const auto& t : res.extras) {
        auto f = open(id + "_" + t.name + ".csv");
        detail::write_row(f, t.columns);
        for (const auto& row : t.rows) detail::write_row(f, row);
    }
    std::vector<std::string> names;
    for (const auto& p : written) names.push_back(p.filename().string());
    auto f = open(id + "_manifest.json");
    f << manifest(res, names).dump(2) << '\n';
    return written;
}

}  // namespace chip
