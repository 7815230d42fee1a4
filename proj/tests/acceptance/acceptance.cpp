// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit 0 iff no FAIL.
#include "fredformer/fredformer.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace fredformer;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
    Verdict verdict = Verdict::Fail;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
    return m;
}

double frob_rel(const Matrix& a, const Matrix& ref) { return (a - ref).norm() / ref.norm(); }

// ---------------------------------------------------------------- 1

// Cosines at integer bins strictly below Nyquist.
std::vector<double> band_limited(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> bin(0, n / 2 - 1);
    std::vector<double> x(n, 0.0);
    for (int c = 0; c < 6; ++c) {
        const std::size_t k = bin(rng);
        const double amp = 0.1 + 3.0 * u(rng);
        const double ph = 2.0 * std::numbers::pi * u(rng);
        for (std::size_t l = 0; l < n; ++l) {
            x[l] += amp * std::cos(2.0 * std::numbers::pi * static_cast<double>((k * l) % n) / static_cast<double>(n) + ph);
        }
    }
    return x;
}

Outcome spectral_correctness() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    double roundtrip = 0.0;
    double parseval = 0.0;
    double linearity = 0.0;
    for (const std::size_t n : {16u, 96u, 720u}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto x = band_limited(rng, n);
            const auto y = band_limited(rng, n);
            const auto ax = dft(x);
            const auto back = idft(ax, n);
            double energy = 0.0;  // time-domain side, summed directly
            for (std::size_t l = 0; l < n; ++l) {
                roundtrip = std::max(roundtrip, std::abs(back[l] - x[l]));
                energy += x[l] * x[l];
            }
            parseval = std::max(parseval, std::abs(half_spectrum_energy(ax, n) - energy) / energy);

            const double a = coef(rng);
            const double b = coef(rng);
            std::vector<double> mix(n);
            for (std::size_t l = 0; l < n; ++l) mix[l] = a * x[l] + b * y[l];
            const auto am = dft(mix);
            const auto ay = dft(y);
            for (std::size_t k = 0; k < am.size(); ++k) {
                linearity = std::max(linearity, std::abs(am[k] - (a * ax[k] + b * ay[k])));
            }
        }
    }
    const bool ok = roundtrip < 1e-9 && parseval < 1e-9 && linearity < 1e-9;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("300 signals, L in {16,96,720}: roundtrip %.2e, parseval rel %.2e, linearity %.2e (tol 1e-9)", roundtrip,
                parseval, linearity)};
}

// ---------------------------------------------------------------- 2

Outcome lemma_one() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<Eigen::Index> channels(1, 6);
    std::uniform_int_distribution<Eigen::Index> bins(6, 60);
    std::uniform_real_distribution<double> expo(-3.0, 3.0);
    double worst = 0.0;
    int bands_checked = 0;
    int degenerate = 0;
    bool degenerate_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index c = channels(rng);
        const Eigen::Index f = bins(rng);
        const Eigen::Index s = std::uniform_int_distribution<Eigen::Index>(2, std::max<Eigen::Index>(2, f / 3))(rng);
        Spectrum spec{random_matrix(rng, c, f), random_matrix(rng, c, f), 2 * f};
        const Eigen::Index n = (f + s - 1) / s;
        for (Eigen::Index band = 0; band < n; ++band) {
            // first band ~1e-3, last ~1e3: maxima span six decades
            const double e = band == 0 ? -3.0 : band == n - 1 ? 3.0 : expo(rng);
            const Eigen::Index w = std::min(s, f - band * s);
            spec.real_part.middleCols(band * s, w) *= std::pow(10.0, e);
            spec.imag_part.middleCols(band * s, w) *= std::pow(10.0, e);
        }
        if (trial % 4 == 0) {
            const Eigen::Index band = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
            const Eigen::Index w = std::min(s, f - band * s);
            spec.real_part.middleCols(band * s, w).setConstant(0.37);
        }

        const BandSet raw = patch_spectrum(spec, s);
        const auto norm = normalize_bands(raw);
        for (Eigen::Index band = 0; band < raw.num_bands(); ++band) {
            const Eigen::Index valid = raw.valid_bins(band);
            const auto& in = raw.bands[static_cast<std::size_t>(band)];
            const auto& out = norm.bands.bands[static_cast<std::size_t>(band)];
            const std::pair<const Matrix*, const Matrix*> blocks[] = {{&in.real_part, &out.real_part},
                                                                      {&in.imag_part, &out.imag_part}};
            for (const auto& [src, dst] : blocks) {
                const auto src_valid = src->leftCols(valid);
                const auto dst_valid = dst->leftCols(valid);
                if (src_valid.maxCoeff() == src_valid.minCoeff()) {
                    ++degenerate;
                    degenerate_ok = degenerate_ok && dst->isZero(0.0);
                    continue;
                }
                ++bands_checked;
                worst = std::max({worst, std::abs(dst_valid.minCoeff()), std::abs(dst_valid.maxCoeff() - 1.0)});
            }
        }
    }
    const bool ok = worst <= 1e-12 && degenerate_ok && degenerate > 0;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("50 spectra, %d blocks: max |min| or |max-1| = %.2e (tol 1e-12); %d degenerate blocks %s", bands_checked,
                worst, degenerate, degenerate_ok ? "all zero" : "NOT zero")};
}

// ---------------------------------------------------------------- 3

Outcome band_independence() {
    std::mt19937_64 rng(3);
    const auto pick = [&](Eigen::Index lo, Eigen::Index hi) {
        return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng);
    };
    int leaks = 0;
    int silent = 0;
    for (int trial = 0; trial < 10; ++trial) {
        FredformerConfig cfg;
        cfg.channels = pick(1, 6);
        cfg.lookback = 2 * pick(8, 40);
        cfg.horizon = 2 * pick(4, 24);
        cfg.patch_len = pick(2, cfg.input_bins() / 2);
        cfg.embed_dim = pick(4, 16);
        cfg.heads = pick(1, 3);
        cfg.head_dim = pick(2, 6);
        cfg.depth = pick(1, 3);
        cfg.mlp_dim = pick(4, 24);
        cfg.share_band_weights = trial % 3 == 2;
        cfg.use_nystrom = trial % 2 == 1;
        cfg.landmarks = pick(1, cfg.channels);
        cfg.seed = static_cast<std::uint64_t>(trial);
        const Fredformer model(cfg);
        const auto params = model.init_params();

        const auto series = make_series(random_matrix(rng, cfg.channels, cfg.lookback));
        const BandSet bands = normalize_bands(patch_spectrum(spectrum_of(series), cfg.patch_len)).bands;
        const auto base = model.encode_bands(params, bands);

        const auto j = static_cast<std::size_t>(pick(0, bands.num_bands() - 1));
        BandSet changed = bands;
        changed.bands[j].real_part = random_matrix(rng, cfg.channels, cfg.patch_len);
        changed.bands[j].imag_part = random_matrix(rng, cfg.channels, cfg.patch_len);
        const auto after = model.encode_bands(params, changed);
        for (std::size_t n = 0; n < base.size(); ++n) {
            const double delta = (after[n] - base[n]).cwiseAbs().maxCoeff();
            if (n != j && delta != 0.0) ++leaks;
            if (n == j && delta == 0.0) ++silent;
        }
    }
    return {leaks == 0 && silent == 0 ? Verdict::Pass : Verdict::Fail,
            fmt("10 configs: %d other-band features changed (want 0), %d perturbed bands unchanged", leaks, silent)};
}

// ---------------------------------------------------------------- 4

Outcome nystrom_trend() {
    double worst_full = 0.0;
    double err4 = 0.0;
    double err16 = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(400 + seed);
        const Matrix q = random_matrix(rng, 32, 16, 0.5);
        const Matrix k = random_matrix(rng, 32, 16, 0.5);
        const Matrix v = random_matrix(rng, 32, 16);
        const Matrix exact = exact_attention(q, k, v).output;
        worst_full = std::max(worst_full, frob_rel(nystrom_attention(q, k, v, 32), exact));
        err4 += frob_rel(nystrom_attention(q, k, v, 4), exact) / 20.0;
        err16 += frob_rel(nystrom_attention(q, k, v, 16), exact) / 20.0;
    }
    const bool ok = worst_full < 1e-5 && err16 <= err4;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("C=32 d=16: m=C max rel %.2e (tol 1e-5); mean rel m=16 %.4f <= m=4 %.4f", worst_full, err16, err4)};
}

// ---------------------------------------------------------------- 5

Outcome gradient_check() {
    FredformerConfig cfg;
    cfg.channels = 3;
    cfg.lookback = 16;
    cfg.horizon = 8;
    cfg.patch_len = 4;
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.head_dim = 4;
    cfg.depth = 2;
    cfg.mlp_dim = 12;
    cfg.seed = 5;
    const Fredformer model(cfg);
    const auto params = model.init_params();
    std::mt19937_64 rng(5);
    const Matrix x = random_matrix(rng, 2 * cfg.channels, cfg.lookback);
    const Matrix y = random_matrix(rng, 2 * cfg.channels, cfg.horizon);
    ModelParams grad;
    model.loss_and_gradient(params, x, y, grad);

    const auto loss = [&](const Vector& values) {
        ModelParams p = params;
        p.values() = values;
        return (model.forecast_batch(p, x) - y).squaredNorm() / static_cast<double>(y.size());
    };
    std::string detail;
    bool ok = true;
    for (const std::string name : {"head.weight", "band1.block0.attn.query"}) {
        const ParamSpec& s = params.spec(name);
        Vector v = params.values();
        Vector numeric(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double keep = v[s.offset + i];
            v[s.offset + i] = keep + 1e-4;
            const double up = loss(v);
            v[s.offset + i] = keep - 1e-4;
            const double down = loss(v);
            v[s.offset + i] = keep;
            numeric[i] = (up - down) / 2e-4;
        }
        const Vector analytic = grad.values().segment(s.offset, s.size());
        const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
        ok = ok && rel < 1e-3;
        detail += fmt("%s%s rel %.2e", detail.empty() ? "" : ", ", name.c_str(), rel);
    }
    return {ok ? Verdict::Pass : Verdict::Fail, "C=3 L=16 H=8, step 1e-4: " + detail + " (tol 1e-3)"};
}

// ---------------------------------------------------------------- 6

struct Case1Run {
    std::vector<Eigen::Index> bins;
    std::vector<double> first;
    std::vector<double> last;
};

Case1Run case1_run(const std::vector<double>& amps, const fs::path& out_dir, const std::string& tag) {
    // bins 458, 2120, 3792 of 10000 sit on window bins 4, 20, 36 for L = H = 96
    const auto gen = gen_case1(case1_config({458, 2120, 3792}, amps, 0));
    const auto data = prepare(gen.series, SplitScheme::ratio(), 96, 96, 1, true);
    FredformerConfig cfg;
    cfg.channels = 1;
    const Fredformer model(cfg);
    TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 1e-3;
    tc.patience = tc.epochs;
    tc.bias = BiasProbeSpec{16, 0, 32};
    const auto result = fit(model, model.init_params(), data.train, data.val, tc);

    if (!out_dir.empty()) {
        std::ofstream out(out_dir / ("case1_" + tag + "_trace.csv"));
        out << "epoch";
        for (const auto b : result.trace.component_bins) out << ',' << b;
        out << '\n';
        for (std::size_t e = 0; e < result.trace.rows.size(); ++e) {
            out << e + 1;
            for (const double d : result.trace.rows[e]) out << ',' << format_double(d);
            out << '\n';
        }
    }
    Case1Run run;
    run.bins = result.trace.component_bins;
    if (!result.trace.rows.empty()) {
        run.first = result.trace.rows.front();
        run.last = result.trace.rows.back();
    }
    return run;
}

Outcome case1_debiasing(const fs::path& out_dir) {
    bool ok = true;
    std::string detail;
    const std::pair<std::string, std::vector<double>> orders[] = {{"increasing", {0.3, 0.6, 1.0}},
                                                                  {"decreasing", {1.0, 0.6, 0.3}}};
    for (const auto& [tag, amps] : orders) {
        const auto run = case1_run(amps, out_dir, tag);
        const bool tracked = run.bins == std::vector<Eigen::Index>{4, 20, 36} && run.last.size() == 3;
        double lo = 1e300;
        double hi = -1e300;
        for (const double d : run.last) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const bool pass = tracked && hi < 0.25 && hi - lo < 0.30;
        ok = ok && pass;
        std::string deltas;
        for (std::size_t i = 0; i < run.last.size(); ++i) {
            deltas += fmt("%s%ld:%.3f(%.3f)", i ? " " : "", static_cast<long>(run.bins[i]), run.last[i], run.first[i]);
        }
        detail += fmt("%s%s [%s] max %.3f spread %.3f", detail.empty() ? "" : "; ", tag.c_str(), deltas.c_str(),
                      tracked ? hi : NAN, tracked ? hi - lo : NAN);
    }
    return {ok ? Verdict::Pass : Verdict::Fail,
            "final-epoch delta per bin (epoch-1 value): " + detail + " (want max < 0.25, spread < 0.30)"};
}

// ---------------------------------------------------------------- 7, 8

struct MultiBand {
    PreparedData data;
    Eigen::Index channels = 4;

    MultiBand() {
        // eight components across the 48 window bins, amplitudes 1.0 down to 0.3
        const double window_freqs[] = {2.3, 7.6, 13.2, 18.7, 24.4, 30.1, 35.8, 41.5};
        PlantConfig pc;
        pc.length = 5000;
        for (int i = 0; i < 8; ++i) {
            pc.bins.push_back(static_cast<Eigen::Index>(window_freqs[i] * static_cast<double>(pc.length) / 96.0));
            pc.amplitudes.push_back(1.0 - 0.1 * i);
        }
        pc.channels = channels;
        pc.seed = 1000;
        data = prepare(gen_planted(pc).series, SplitScheme::ratio(), 96, 96, 1, true);
    }

    double val_mse(const std::string& variant, std::uint64_t seed) {
        const std::string key = variant + "/" + std::to_string(seed);
        if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
        FredformerConfig cfg;
        cfg.channels = channels;
        cfg.seed = seed;
        if (variant == "S=48") cfg.patch_len = 48;
        if (variant == "No-CW") cfg.channel_attention = false;
        if (variant == "No-FR") cfg.frequency_refinement = false;
        const Fredformer model(cfg);
        TrainConfig tc;
        tc.epochs = 10;
        tc.learning_rate = 1e-3;
        tc.patience = tc.epochs;
        tc.seed = seed;
        const auto result = fit(model, model.init_params(), data.train, data.val, tc);
        const double mse = evaluate(model, result.params, data.val).mse;
        cache_[key] = mse;
        return mse;
    }

private:
    std::map<std::string, double> cache_;
};

Outcome patch_length_trend(MultiBand& mb) {
    const double s8 = mb.val_mse("full", 0);
    const double none = mb.val_mse("S=48", 0);
    return {s8 < none ? Verdict::Pass : Verdict::Fail,
            fmt("8-component set, C=4: val MSE S=8 %.4f vs no patching (S=48, N=1) %.4f (want strictly lower)", s8, none)};
}

Outcome ablation_direction(MultiBand& mb) {
    const auto median = [&](const std::string& variant) {
        std::vector<double> v;
        for (std::uint64_t seed = 0; seed < 3; ++seed) v.push_back(mb.val_mse(variant, seed));
        std::sort(v.begin(), v.end());
        return v[1];
    };
    const double full = median("full");
    const double no_cw = median("No-CW");
    const double no_fr = median("No-FR");
    const bool ok = full <= no_cw && full <= no_fr;
    return {ok ? Verdict::Pass : Verdict::Fail,
            fmt("median val MSE over 3 seeds: Full %.4f, No-CW %.4f, No-FR %.4f (want Full <= both)", full, no_cw, no_fr)};
}

// ---------------------------------------------------------------- 9

Outcome etth1_spot_check(const std::string& path) {
    if (path.empty()) return {Verdict::Skip, "extended check; pass --etth1 <ETTh1.csv> to run"};
    const auto series = load_csv(path);
    const auto data = prepare(series, SplitScheme::ett_months(24), 96, 96, 1, true);
    FredformerConfig cfg;
    cfg.channels = series.channels();
    const Fredformer model(cfg);
    TrainConfig tc;
    tc.epochs = 10;
    const auto result = fit(model, model.init_params(), data.train, data.val, tc);
    const double mse = evaluate(model, result.params, data.test).mse;
    const bool ok = std::abs(mse - 0.373) <= 0.040;
    return {ok ? Verdict::Pass : Verdict::Fail, fmt("L=96 H=96 S=8 test MSE %.4f (want 0.373 +/- 0.040)", mse)};
}

// ---------------------------------------------------------------- 10

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FREDFORMER_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(const fs::path& scratch) {
    const fs::path root = scratch / "determinism";
    fs::remove_all(root);
    const auto dir = [&](const std::string& name) { return (root / name).string(); };
    const std::string model = " --lookback 48 --horizon 24 --patch-len 6 --embed-dim 8 --heads 2 --head-dim 4 --depth 1"
                              " --mlp-dim 16 --epochs 3 --bias-band-size 6 --seed 11";

    // first pass
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"generate", "generate case1 --length 3000 --bins 31,156,500 --channels 2 --seed 4 --out-dir " + dir("generate")},
        {"train", "train --data " + dir("generate") + "/series.csv" + model + " --out-dir " + dir("train")},
        {"forecast", "forecast --data " + dir("generate") + "/series.csv --checkpoint " + dir("train") +
                         "/checkpoint.json --out-dir " + dir("forecast")},
        {"bias-report", "bias-report --trace " + dir("train") + "/bias_trace.csv --out-dir " + dir("bias-report")},
    };
    for (const auto& [name, args] : runs) {
        if (run_cli(args) != 0) return {Verdict::Fail, name + " exited non-zero"};
    }
    // replay each command from the config its manifest points to
    int compared = 0;
    for (const auto& [name, args] : runs) {
        const std::string mode = name == "generate" ? " case1" : "";
        const std::string replay = name + mode + " --config " + dir(name) + "/run_config.toml --out-dir " + dir(name + "_replay");
        if (run_cli(replay) != 0) return {Verdict::Fail, name + " replay exited non-zero"};
        for (const auto& entry : fs::directory_iterator(dir(name))) {
            if (entry.path().extension() != ".csv") continue;
            const fs::path twin = fs::path(dir(name + "_replay")) / entry.path().filename();
            if (slurp(entry.path()) != slurp(twin)) {
                return {Verdict::Fail, name + ": " + entry.path().filename().string() + " differs on replay"};
            }
            ++compared;
        }
    }
    return {compared >= 5 ? Verdict::Pass : Verdict::Fail,
            fmt("generate/train/forecast/bias-report replayed from manifests: %d CSV artifacts bit-identical", compared)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fredformer acceptance criteria", "fredformer_acceptance"};
    std::vector<int> only;
    std::string etth1;
    std::string out_dir;
    std::string scratch = fs::temp_directory_path() / "fredformer_acceptance";
    app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
    app.add_option("--etth1", etth1, "ETTh1 CSV for the extended spot check");
    app.add_option("--out-dir", out_dir, "Write Case-1 traces here");
    app.add_option("--scratch", scratch, "Working directory for CLI runs")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    if (!out_dir.empty()) fs::create_directories(out_dir);
    fs::create_directories(scratch);

    MultiBand multiband;
    const std::vector<Criterion> criteria = {
        {1, "spectral correctness", 10, spectral_correctness},
        {2, "normalized band maxima", 5, lemma_one},
        {3, "band independence", 30, band_independence},
        {4, "nystrom exactness and trend", 30, nystrom_trend},
        {5, "gradient check", 60, gradient_check},
        {6, "case-1 debiasing", 15 * 60, [&] { return case1_debiasing(out_dir); }},
        {7, "patch-length trend", 30 * 60, [&] { return patch_length_trend(multiband); }},
        {8, "ablation direction", 45 * 60, [&] { return ablation_direction(multiband); }},
        {9, "etth1 spot check", 90 * 60, [&] { return etth1_spot_check(etth1); }},
        {10, "determinism", 10 * 60, [&] { return determinism(scratch); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {Verdict::Fail, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.verdict == Verdict::Pass && secs > c.budget_seconds) {
            o.verdict = Verdict::Fail;
            o.detail += fmt(" (over the %.0f s budget)", c.budget_seconds);
        }
        const char* label = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
        if (o.verdict == Verdict::Fail) ++failures;
        std::printf("%s %2d %s: %s [%.1f s]\n", label, c.id, c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
