// Acceptance checks, one line per criterion. Pass criterion numbers as
// arguments to run a subset. Exit status is 1 when any check fails.

#include <chip/estimation.hpp>
#include <chip/experiments.hpp>
#include <chip/hawkes.hpp>
#include <chip/ingest.hpp>
#include <chip/likelihood_eval.hpp>
#include <chip/metrics.hpp>
#include <chip/theory.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace chip;

namespace {

enum class Status { pass, fail, skipped };

struct Outcome {
    Status status;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string printf_string(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Adds the runtime limit to a numeric verdict.
Outcome timed(bool ok, double elapsed, double limit, std::string detail) {
    detail += printf_string("; %.1f s (limit %.0f s)", elapsed, limit);
    return {ok && elapsed < limit ? Status::pass : Status::fail, detail};
}

// 1. Recursive likelihood against the direct double sum.
double quadratic_loglik(const HawkesParams& p, const std::vector<double>& t, double horizon) {
    double ll = -p.mu * horizon;
    for (std::size_t q = 0; q < t.size(); ++q) {
        double excite = 0.0;
        for (std::size_t i = 0; i < q; ++i) excite += std::exp(-p.beta * (t[q] - t[i]));
        ll += std::log(p.mu + p.alpha * excite);
        ll -= p.alpha / p.beta * (1.0 - std::exp(-p.beta * (horizon - t[q])));
    }
    return ll;
}

Outcome likelihood_oracle() {
    constexpr double tol = 1e-10, limit = 10.0;
    const auto t0 = Clock::now();
    std::mt19937_64 g(20240601);
    std::uniform_real_distribution<double> u(0.01, 5.0);
    std::uniform_int_distribution<std::size_t> len(1, 500);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double horizon = 100.0 * u(g);
        const HawkesParams p{u(g), u(g), u(g) + 0.05};
        std::uniform_real_distribution<double> at(0.0, horizon);
        std::vector<double> t(len(g));
        for (auto& x : t) x = at(g);
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        const double ref = quadratic_loglik(p, t, horizon);
        worst = std::max(worst, std::abs(log_likelihood(p, t, horizon) - ref) / std::abs(ref));
    }
    return timed(worst <= tol, seconds_since(t0), limit, printf_string("max relative error %.2e (tol %.0e)", worst, tol));
}

// 2. Moment estimators applied to the theoretical moments.
Outcome moment_identity() {
    constexpr double tol = 1e-12, limit = 1.0;
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            for (int h = 0; h < 10; ++h) {
                const double m = 0.01 + 0.98 * i / 9.0;
                const double mu = 1e-4 * std::pow(10.0, 4.0 * j / 9.0);
                const double horizon = std::pow(10.0, 4.0 * h / 9.0);
                const auto mom = asymptotic_moments(mu, m, 1.0, horizon);
                BlockPairStats s;
                s.pair_count = Eigen::MatrixXd::Constant(1, 1, 100.0);
                s.mean = Eigen::MatrixXd::Constant(1, 1, mom.mean);
                s.variance = Eigen::MatrixXd::Constant(1, 1, mom.variance);
                s.event_count = s.pair_count.cwiseProduct(s.mean);
                const auto est = moment_estimates(s, horizon);
                worst = std::max({worst, std::abs(est.ratio(0, 0) - m) / m, std::abs(est.mu(0, 0) - mu) / mu});
            }
    return timed(worst <= tol, seconds_since(t0), limit,
                 printf_string("1000 grid points, max relative error %.2e (tol %.0e)", worst, tol));
}

// 3. Simulated count moments against the asymptotic formulas.
Outcome simulation_moments() {
    constexpr double z = 3.0, limit = 120.0;
    constexpr int reps = 200;
    const auto t0 = Clock::now();
    struct Case {
        HawkesParams p;
        double horizon;
    };
    // Long windows relative to 1 / (beta (1 - m)) so the limiting moments apply.
    const std::vector<Case> cases{{{1.0, 0.5, 1.0}, 2000},    {{0.5, 0.2, 1.0}, 2000},   {{2.0, 0.3, 2.0}, 1000},
                                  {{0.1, 0.9, 1.0}, 20000},   {{0.05, 4.0, 5.0}, 20000}, {{1.0, 0.0, 1.0}, 1000},
                                  {{0.2, 1.5, 3.0}, 3000},    {{3.0, 0.7, 1.0}, 500},    {{0.01, 0.6, 0.8}, 100000},
                                  {{0.5, 5.0, 10.0}, 2000}};
    int misses = 0;
    double worst = 0.0;
    Rng g(77);
    for (const auto& c : cases) {
        std::vector<double> counts;
        for (int r = 0; r < reps; ++r) counts.push_back(static_cast<double>(simulate_times(c.p, c.horizon, g).size()));
        double mean = 0.0;
        for (double x : counts) mean += x;
        mean /= reps;
        double ss = 0.0;
        for (double x : counts) ss += (x - mean) * (x - mean);
        const double var = ss / (reps - 1);
        const auto th = asymptotic_moments(c.p.mu, c.p.alpha, c.p.beta, c.horizon);
        const double se_mean = std::sqrt(var / reps);
        const double se_var = var * std::sqrt(2.0 / (reps - 1));
        const double zm = std::abs(mean - th.mean) / se_mean, zv = std::abs(var - th.variance) / se_var;
        worst = std::max({worst, zm, zv});
        misses += (zm > z) + (zv > z);
    }
    return timed(misses == 0, seconds_since(t0), limit,
                 printf_string("10 parameter sets x %d replicates, largest deviation %.2f SE (limit %.0f)", reps, worst, z));
}

const AggregateRow& cell(const ExperimentResult& res, double n, const std::string& matrix) {
    for (std::size_t g = 0; g < res.points.size(); ++g)
        if (res.points[g]["n"] == n) return res.find(g, "matrix", matrix);
    throw DomainError("missing grid cell");
}

// 4. Baseline-rate regime: the binary matrix wins.
Outcome fig2a_regime() {
    constexpr double limit = 300.0, min_ari = 0.9;
    const auto t0 = Clock::now();
    const auto res = run_experiment(default_config("fig2a"));
    const double a512 = cell(res, 512, "A").mean_of("ari");
    bool ok = a512 > min_ari;
    std::string d = printf_string("n=512 ARI(A)=%.3f (need > %.1f)", a512, min_ari);
    for (double n : {128.0, 256.0}) {
        const double a = cell(res, n, "A").mean_of("ari"), w = cell(res, n, "N").mean_of("ari");
        ok = ok && a > w;
        d += printf_string("; n=%g ARI(A)=%.3f vs ARI(N)=%.3f", n, a, w);
    }
    return timed(ok, seconds_since(t0), limit, d);
}

// 5. Excitation regime: the count matrix wins.
Outcome fig2b_regime() {
    constexpr double limit = 300.0, min_n = 0.9, max_a = 0.1;
    const auto t0 = Clock::now();
    auto cfg = default_config("fig2b");
    apply_grid_override(cfg, "n=512");
    const auto res = run_experiment(cfg);
    const double w = cell(res, 512, "N").mean_of("ari"), a = cell(res, 512, "A").mean_of("ari");
    return timed(w > min_n && a < max_a, seconds_since(t0), limit,
                 printf_string("n=512 ARI(N)=%.3f (need > %.1f), ARI(A)=%.3f (need < %.1f)", w, min_n, a, max_a));
}

// 6. Log-log MSE slopes.
Outcome mse_decay() {
    constexpr double lo = 1.7, hi = 2.4, limit = 1200.0;
    const auto t0 = Clock::now();
    const auto res = run_experiment(default_config("fig4"));
    bool ok = !res.extras.empty();
    std::string d = "decay rates";
    for (const auto& row : res.extras.at(0).rows) {
        const double rate = std::stod(row[1]);
        ok = ok && rate >= lo && rate <= hi;
        d += " " + row[0] + "=" + printf_string("%.2f", rate);
    }
    d += printf_string(" (need [%.1f, %.1f])", lo, hi);
    return timed(ok, seconds_since(t0), limit, d);
}

// Strict decreases (or increases when `decreasing`) between neighbours along
// `axis`, over every line of the heatmap.
int inversions(const ExperimentResult& res, const std::string& axis, const std::string& other, bool decreasing) {
    std::map<double, std::map<double, double>> table;  // other value -> axis value -> mean ARI
    for (const auto& row : res.aggregate)
        table[res.points[row.grid_index][other]][res.points[row.grid_index][axis]] = row.mean_of("ari");
    int count = 0;
    for (const auto& [o, line] : table) {
        (void)o;
        for (auto it = line.begin(); std::next(it) != line.end(); ++it) {
            const double a = it->second, b = std::next(it)->second;
            if (decreasing ? b > a : b < a) ++count;
        }
    }
    return count;
}

Outcome heatmap_monotonicity() {
    constexpr double limit = 900.0;
    constexpr int allowed = 1;
    const auto t0 = Clock::now();
    struct Map {
        const char* id;
        const char* axis1;
        bool dec1;
        const char* axis2;
        bool dec2;
    };
    const std::vector<Map> maps{{"heatmap-fixed-n", "T", false, "k", true},
                                {"heatmap-fixed-t", "n", false, "k", true},
                                {"heatmap-fixed-k", "n", false, "T", false}};
    bool ok = true;
    std::string d;
    for (const auto& m : maps) {
        const auto res = run_experiment(default_config(m.id));
        const int i1 = inversions(res, m.axis1, m.axis2, m.dec1), i2 = inversions(res, m.axis2, m.axis1, m.dec2);
        ok = ok && i1 <= allowed && i2 <= allowed;
        d += printf_string("%s%s inversions %s=%d %s=%d", d.empty() ? "" : "; ", m.id, m.axis1, i1, m.axis2, i2);
    }
    d += printf_string(" (at most %d per axis)", allowed);
    return timed(ok, seconds_since(t0), limit, d);
}

// 8. Simultaneous interval coverage with planted communities.
Outcome interval_coverage() {
    constexpr double need = 0.95, limit = 600.0;
    const auto t0 = Clock::now();
    const auto res = run_experiment(default_config("ci-coverage"));
    const auto& row = res.aggregate.at(0);
    const double m = row.mean_of("m_all_covered"), mu = row.mean_of("mu_all_covered");
    return timed(m >= need && mu >= need && row.failed == 0, seconds_since(t0), limit,
                 printf_string("%zu replicates, joint coverage m=%.3f mu-differences=%.3f (need >= %.2f)",
                               row.count.at(0), m, mu, need));
}

// 9. Which matrix the bounds favour in each regime.
Outcome bound_dichotomy() {
    constexpr double limit = 1.0;
    const auto t0 = Clock::now();
    const auto excite = SimplifiedTheoryInputs::from_spec({512, 4, 0.001, 0.006, 0.008, 0.001, 0.001, 0.008, 400.0});
    const auto base = SimplifiedTheoryInputs::from_spec({512, 4, 0.002, 7.0, 8.0, 0.001, 7.0, 8.0, 400.0});
    const auto b1 = binary_bound(excite).selected();
    const auto w1 = weighted_bound(excite);
    const auto b2 = binary_bound(base).selected();
    const auto w2 = weighted_bound(base);
    const bool ok = b1.infinite && b1.flagged && !w1.infinite && std::isfinite(w1.value) && b2.value < w2.value;
    return timed(ok, seconds_since(t0), limit,
                 printf_string("alpha regime: binary %s, weighted %.3g; equal-m regime: binary %.3g < weighted %.3g",
                               b1.infinite ? "infinite" : "finite", w1.value, b2.value, w2.value));
}

// 10. ARI against the contingency-table formula.
double ari_contingency(const std::vector<Label>& a, const std::vector<Label>& b) {
    std::map<std::pair<Label, Label>, double> nij;
    std::map<Label, double> ai, bj;
    for (std::size_t i = 0; i < a.size(); ++i) {
        nij[{a[i], b[i]}] += 1;
        ai[a[i]] += 1;
        bj[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [k, v] : nij) index += c2(v);
    for (const auto& [k, v] : ai) sa += c2(v);
    for (const auto& [k, v] : bj) sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(a.size()));
    const double max_index = (sa + sb) / 2;
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

Outcome ari_oracle() {
    constexpr double tol = 1e-12, limit = 5.0;
    const auto t0 = Clock::now();
    std::mt19937_64 g(99);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + g() % 200;
        const Label ka = 1 + static_cast<Label>(g() % 8), kb = 1 + static_cast<Label>(g() % 8);
        std::vector<Label> a(n), b(n);
        for (auto& x : a) x = static_cast<Label>(g() % ka);
        for (auto& x : b) x = static_cast<Label>(g() % kb);
        worst = std::max(worst, std::abs(adjusted_rand(a, b) - ari_contingency(a, b)));
    }
    const double half = adjusted_rand(std::vector<Label>{1, 1, 2, 2}, std::vector<Label>{1, 2, 1, 2});
    return timed(worst <= tol && std::abs(half + 0.5) <= tol, seconds_since(t0), limit,
                 printf_string("max abs difference %.2e over 1000 pairs (tol %.0e); (1,1,2,2)/(1,2,1,2) -> %.4f", worst,
                               tol, half));
}

// 11. Held-out likelihood on the real datasets, when supplied.
Outcome real_data() {
    const char* reality = std::getenv("CHIP_REALITY_CSV");
    const char* enron = std::getenv("CHIP_ENRON_CSV");
    if (!reality && !enron) return {Status::skipped, "set CHIP_REALITY_CSV and/or CHIP_ENRON_CSV to run"};
    bool ok = true;
    std::string d;
    auto check = [&](const char* name, double value, double target, double tol) {
        const bool good = std::abs(value - target) <= tol;
        ok = ok && good;
        d += printf_string("%s%s %.3f (target %.2f +- %.2f)", d.empty() ? "" : "; ", name, value, target, tol);
    };
    if (reality) {
        const auto r = evaluate_split(split_by_count(ingest_file(reality).log, 661), 1);
        check("Reality k=1 CHIP", r.chip_ll_per_event, -4.83, 0.15);
        check("Reality k=1 Poisson", r.poisson_ll_per_event, -10.3, 0.3);
    }
    if (enron) {
        const auto r = evaluate_split(split_by_count(ingest_file(enron).log, 1000), 2);
        check("Enron k=2 CHIP", r.chip_ll_per_event, -5.61, 0.15);
    }
    return {ok ? Status::pass : Status::fail, d};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"likelihood oracle", likelihood_oracle},    {"moment identity", moment_identity},
        {"simulation moments", simulation_moments},  {"binary-favoured regime", fig2a_regime},
        {"count-favoured regime", fig2b_regime},     {"MSE decay", mse_decay},
        {"heatmap monotonicity", heatmap_monotonicity}, {"interval coverage", interval_coverage},
        {"bound dichotomy", bound_dichotomy},        {"ARI oracle", ari_oracle},
        {"real data", real_data}};
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    bool failed = false;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Status::fail, std::string("error: ") + e.what()};
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIPPED";
        std::printf("%-7s %2d %s: %s\n", tag, id, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed = failed || o.status == Status::fail;
    }
    return failed ? 1 : 0;
}
