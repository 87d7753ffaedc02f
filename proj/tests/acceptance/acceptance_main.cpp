/*
 Copyright 2026 The touchmap Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Acceptance checks. Each criterion prints one PASS/FAIL line with the
// measured values; the exit status is 0 only if every selected check passed.
//
//   touchmap_acceptance [geometry|features|detector|manifold|
//                        manifold_neighborhood_preservation|regressor|end_to_end|all]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "test_util.hpp"
#include "touchmap/corpus.hpp"
#include "touchmap/detector.hpp"
#include "touchmap/dsp.hpp"
#include "touchmap/manifold.hpp"
#include "touchmap/metrics.hpp"
#include "touchmap/pipeline.hpp"
#include "touchmap/regressor.hpp"

using namespace touchmap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

bool report(const std::string& name, Check& c, double runtime) {
    std::printf("%s %s:%s runtime=%.2fs\n", c.pass ? "PASS" : "FAIL", name.c_str(), c.detail.str().c_str(), runtime);
    std::fflush(stdout);
    return c.pass;
}

// Spectrogram geometry ---------------------------------------------------------

bool geometry() {
    const auto t0 = Clock::now();
    Check c;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    AudioClip clip;
    clip.samples.resize(3200);  // 200 ms
    for (auto& v : clip.samples) v = u(rng);
    const auto spec = stft(clip, StftConfig{480, 160, 512, true});
    auto cfg = PipelineConfig{};
    cfg.finalize();
    c.detail << " shape=" << spec.n_bins << "x" << spec.n_frames << " regressor_input=" << cfg.regressor.input_bins
             << "x" << cfg.regressor.input_frames;
    c.require(spec.n_bins == 257 && spec.n_frames == 20, "257x20");
    c.require(cfg.regressor.input_bins == 257 && cfg.regressor.input_frames == 20, "regressor input 257x20");
    const double t = seconds_since(t0);
    c.require(t < 1.0, "runtime < 1 s");
    return report("geometry", c, t);
}

// Feature invariants -----------------------------------------------------------

bool features() {
    const auto t0 = Clock::now();
    Check c;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> frames_d(1, 40);
    std::exponential_distribution<double> ex(1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    double sf_lo = 1.0, sf_hi = 0.0, onset_min = 0.0, cen_lo = 1e300, cen_hi = -1e300;
    double worst_homog = 0.0, worst_invar = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(frames_d(rng));
        auto spec = Spectrogram::zeros(257, n);
        const double sparsity = u(rng);
        for (auto& m : spec.mag) m = u(rng) < sparsity ? 0.0 : ex(rng) * std::pow(10.0, 4.0 * u(rng) - 2.0);
        const auto sf = spectral_flatness(spec);
        const auto on = onset_strength(spec);
        const auto ce = spectral_centroid(spec);
        for (std::size_t i = 0; i < n; ++i) {
            sf_lo = std::min(sf_lo, sf[i]);
            sf_hi = std::max(sf_hi, sf[i]);
            onset_min = std::min(onset_min, on[i]);
            cen_lo = std::min(cen_lo, ce[i]);
            cen_hi = std::max(cen_hi, ce[i]);
        }

        // Energy and onset are homogeneous of degree 1; centroid is scale-free.
        const double k = std::pow(10.0, 4.0 * u(rng) - 2.0);
        auto scaled = spec;
        for (auto& m : scaled.mag) m *= k;
        const auto e1 = energy_contour(spec), e2 = energy_contour(scaled);
        const auto o2 = onset_strength(scaled);
        const auto c2 = spectral_centroid(scaled);
        // Flatness is scale-free only where the floor is negligible: strictly positive spectra.
        auto pos = spec;
        for (auto& m : pos.mag) m += 1e-3 * (1.0 + ex(rng));
        auto pos_scaled = pos;
        for (auto& m : pos_scaled.mag) m *= k;
        const auto f1 = spectral_flatness(pos, 1e-300), f2 = spectral_flatness(pos_scaled, 1e-300);
        for (std::size_t i = 0; i < n; ++i) {
            auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
            worst_homog = std::max({worst_homog, rel(e2[i], k * e1[i]), rel(o2[i], k * on[i])});
            worst_invar = std::max({worst_invar, rel(c2[i], ce[i]), std::abs(f2[i] - f1[i])});
        }
    }
    c.require(sf_lo >= 0.0 && sf_hi <= 1.0, "SF in [0,1]");
    c.require(onset_min >= 0.0, "O >= 0");
    c.require(cen_lo >= 0.0 && cen_hi <= 8000.0, "centroid in [0, 8000]");
    c.require(worst_homog < 1e-12, "homogeneity");
    c.require(worst_invar < 1e-9, "scale invariance");

    auto flat = Spectrogram::zeros(257, 1);
    std::fill(flat.mag.begin(), flat.mag.end(), 0.37);
    const double sf_flat = spectral_flatness(flat)[0];
    auto ex2 = Spectrogram::zeros(2, 1);
    ex2.mag = {1.0, 4.0};
    const double sf_ex = spectral_flatness(ex2)[0];
    c.require(std::abs(sf_flat - 1.0) <= 1e-9, "flat frame SF = 1");
    c.require(std::abs(sf_ex - 0.8) <= 1e-9, "[1,4] -> 0.8");

    char buf[512];
    std::snprintf(buf, sizeof buf,
                  " n=1000 SF=[%.3g,%.3g] O_min=%.3g centroid=[%.1f,%.1f]Hz flat=%.12f ex[1,4]=%.12f"
                  " homog_err=%.2g invar_err=%.2g",
                  sf_lo, sf_hi, onset_min, cen_lo, cen_hi, sf_flat, sf_ex, worst_homog, worst_invar);
    c.detail << buf;
    return report("features", c, seconds_since(t0));
}

// Detector ---------------------------------------------------------------------

bool detector() {
    Check c;
    const auto spec = SynthSpec::standard();
    const auto ts = Clock::now();
    const auto corpus = synth_audio(spec);
    const double synth_s = seconds_since(ts);

    const auto t0 = Clock::now();
    const DetectorConfig cfg;
    MatchStats total;
    std::vector<Spectrogram> specs;
    std::vector<FeatureTracks> feats;
    for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
        specs.push_back(stft(corpus.clips[i]));
        feats.push_back(compute_features(corpus.clips[i], specs.back()));
        std::vector<double> times;
        for (const auto& e : detect_events(specs.back(), feats.back(), cfg)) times.push_back(e.peak_time);
        total += match_events(times, corpus.truth.clips[i].event_times, 0.010);
    }
    const double detect_s = seconds_since(t0);
    double max_err = 0.0;
    for (double e : total.timing_errors) max_err = std::max(max_err, std::abs(e));

    // Monotone thresholds: raising any gate never adds an event.
    const auto tm = Clock::now();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        DetectorConfig lo, hi;
        double a = 1.0 + 8.0 * u(rng), b = 1.0 + 8.0 * u(rng);
        lo.energy_prominence_ratio = std::min(a, b);
        hi.energy_prominence_ratio = std::max(a, b);
        a = 0.9 * u(rng), b = 0.9 * u(rng);
        lo.flatness_min = std::min(a, b);
        hi.flatness_min = std::max(a, b);
        a = 1.0 + 8.0 * u(rng), b = 1.0 + 8.0 * u(rng);
        lo.onset_ratio_min = std::min(a, b);
        hi.onset_ratio_min = std::max(a, b);
        const std::size_t clip = static_cast<std::size_t>(trial) % specs.size();
        for (std::size_t k = clip; k < clip + 10; ++k) {
            std::set<std::size_t> loose, tight;
            for (const auto& e : detect_events(specs[k], feats[k], lo)) loose.insert(e.peak_frame);
            for (const auto& e : detect_events(specs[k], feats[k], hi)) tight.insert(e.peak_frame);
            if (!std::includes(loose.begin(), loose.end(), tight.begin(), tight.end())) ++violations;
        }
    }
    const double mono_s = seconds_since(tm);

    char buf[512];
    std::snprintf(buf, sizeof buf,
                  " clips=%zu truth=%zu detected=%zu precision=%.4f recall=%.4f max_timing_err=%.2fms"
                  " monotone_violations=%d/500 synth=%.1fs detect=%.2fs monotone=%.2fs",
                  corpus.clips.size(), total.true_positives + total.false_negatives,
                  total.true_positives + total.false_positives, total.precision(), total.recall(), max_err * 1e3,
                  violations, synth_s, detect_s, mono_s);
    c.detail << buf;
    c.require(total.precision() >= 0.95, "precision >= 0.95");
    c.require(max_err <= 0.010, "timing within 10 ms");
    c.require(violations == 0, "monotone thresholds");
    c.require(detect_s + mono_s < 30.0, "runtime < 30 s");
    return report("detector", c, detect_s + mono_s);
}

// Manifold ---------------------------------------------------------------------

constexpr std::size_t kBlobPoints = 3000;

struct BlobLayout {
    LabeledEmbedding blobs;
    ManifoldCoords coords;
    double seconds = 0.0;
};

const BlobLayout& blob_layout() {
    static const BlobLayout layout = [] {
        BlobLayout l;
        l.blobs = gaussian_blobs(kBlobPoints, 64, 3, 10.0, 0.5, 17);
        const auto t0 = Clock::now();
        l.coords = embed(l.blobs.emb, ManifoldConfig{});
        l.seconds = seconds_since(t0);
        return l;
    }();
    return layout;
}

bool manifold() {
    Check c;
    const auto& l = blob_layout();
    const auto km = kmeans(l.coords.xy, l.coords.size(), 2, 3, 5);
    const double purity = cluster_purity(km.labels, l.blobs.labels);
    const auto t0 = Clock::now();
    const auto again = embed(l.blobs.emb, ManifoldConfig{});
    const double rerun_s = seconds_since(t0);
    const bool identical = again.xy == l.coords.xy;
    char buf[256];
    std::snprintf(buf, sizeof buf, " points=%zu dim=64 purity=%.4f deterministic=%s", kBlobPoints, purity,
                  identical ? "bit-exact" : "differs");
    c.detail << buf;
    c.require(purity >= 0.9, "purity >= 0.9");
    c.require(identical, "seeded determinism");
    c.require(l.seconds < 120.0 && rerun_s < 120.0, "runtime < 2 min");
    return report("manifold", c, l.seconds);
}

bool manifold_neighborhood_preservation() {
    Check c;
    const auto& l = blob_layout();
    const auto t0 = Clock::now();
    const double np = neighborhood_preservation(l.blobs.emb, l.coords, 15);
    char buf[256];
    std::snprintf(buf, sizeof buf, " points=%zu k=15 preservation=%.4f (random layout ~ %.4f)", kBlobPoints, np,
                  15.0 / (kBlobPoints - 1.0));
    c.detail << buf;
    c.require(np >= 0.8, "preservation >= 0.8");
    return report("manifold_neighborhood_preservation", c, l.seconds + seconds_since(t0));
}

// Regressor --------------------------------------------------------------------

// 32 segments cut at the true event times of eight standard clips; every
// segment of a clip shares the clip's target, as in the pipeline.
std::vector<TrainingPair> overfit_pairs() {
    auto spec = SynthSpec::standard();
    spec.n_clips = 8;
    const auto corpus = synth_audio(spec);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    const DetectorConfig dc;
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
        const std::array<double, 2> target{u(rng), u(rng)};
        for (double t : corpus.truth.clips[i].event_times) {
            DetectionEvent ev;
            ev.peak_time = t;
            const auto [s, e] = segment_bounds(t, kPipelineSampleRate, dc);
            ev.segment_start = s;
            ev.segment_end = e;
            TrainingPair p;
            p.features = segment_features(extract_segment(corpus.clips[i], ev, dc));
            p.target = target;
            p.clip_id = corpus.truth.clips[i].clip_id;
            pairs.push_back(std::move(p));
        }
    }
    return pairs;
}

bool regressor() {
    const auto t0 = Clock::now();
    Check c;
    const RegressorConfig base;

    // Gradient check over every parameter tensor of the full-size network.
    Network<double> net(base);
    net.init(31);
    for (auto& b : net.param_view("dense.bias")) b = 0.1;
    std::mt19937_64 rng(32);
    std::normal_distribution<double> nd;
    std::vector<double> x(net.input_size());
    for (auto& v : x) v = nd(rng);
    const auto fine = testing::gradient_check(net, x, {0.7, -1.3}, 240, 1e-6, 33);
    const auto coarse = testing::gradient_check(net, x, {0.7, -1.3}, 240, 1e-4, 34);
    const bool all_layers = fine.layers_covered.size() == net.tensors().size();
    c.require(fine.max_rel_error < 1e-4 && all_layers, "gradient check h=1e-6");
    c.require(coarse.max_rel_error < 1e-4, "gradient check h=1e-4");

    // Overfit 32 pairs.
    const auto pairs = overfit_pairs();
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const auto& p : pairs)
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], p.target[a]);
            hi[a] = std::max(hi[a], p.target[a]);
        }
    const double span = std::max(hi[0] - lo[0], hi[1] - lo[1]);
    auto oc = base;
    oc.epochs = 1000;
    oc.patience = 1000;
    oc.max_steps = 2000;
    oc.target_metric = 0.05 * span;
    oc.seed = 35;
    const auto fit = train(pairs, oc);
    const double final_err = fit.history.back().train_metric;
    c.require(final_err < 0.05 * span, "overfit < 5% of span");

    // lr = 0 leaves the initial weights in place.
    auto zc = base;
    zc.lr = 0.0;
    zc.epochs = 2;
    zc.seed = 36;
    const auto frozen = train(pairs, zc);
    Network<float> init(zc);
    init.init(zc.seed);
    const bool noop = frozen.model.net.params() == init.params();
    c.require(noop, "lr=0 no-op");

    // Checkpoint round trip.
    testing::TempDir dir("accept_ckpt");
    save_model(fit.model, dir / "m.json");
    const auto back = load_model(dir / "m.json");
    save_model(back, dir / "m2.json");
    const bool exact = back == fit.model && testing::read_bytes(dir / "m.bin") == testing::read_bytes(dir / "m2.bin");
    c.require(exact, "checkpoint bit-exact");

    char buf[640];
    std::snprintf(buf, sizeof buf,
                  " gradcheck(h=1e-6)=%.2e over %zu/%zu tensors gradcheck(h=1e-4)=%.2e (%zu kink draws replaced)"
                  " overfit=%.4f of span after %lld steps (%s) lr0_noop=%s checkpoint=%s",
                  fine.max_rel_error, fine.layers_covered.size(), net.tensors().size(), coarse.max_rel_error,
                  coarse.skipped_kinks, final_err / span, fit.steps, fit.stop_reason.c_str(), noop ? "yes" : "no",
                  exact ? "bit-exact" : "differs");
    c.detail << buf;
    return report("regressor", c, seconds_since(t0));
}

// End to end -------------------------------------------------------------------

bool end_to_end() {
    const auto t0 = Clock::now();
    Check c;
    testing::TempDir dir("accept_e2e");
    const auto spec = SynthSpec::standard();
    write_corpus(dir.path(), spec, synth_audio(spec));
    PipelineConfig cfg;
    cfg.finalize();
    const auto det = run_detect(dir / "audio", cfg, dir / "detect");
    run_reduce(dir / "embeddings.csv", cfg, dir / "reduce", dir / "manifest.jsonl");
    const auto rep =
        run_train_eval(dir.path() / "detect" / "segments", dir.path() / "reduce" / "coords.csv", dir / "manifest.jsonl",
                       cfg, dir / "train");
    const double t = seconds_since(t0);

    const double acc = rep.holdout && rep.holdout->nearest_cluster_accuracy ? *rep.holdout->nearest_cluster_accuracy : 0.0;
    const double frac = rep.holdout_error_fraction().value_or(1e300);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  " clips=%zu segments=%zu held_out_clips=%zu held_out_segments=%zu nearest_cluster_acc=%.4f"
                  " mean_err=%.4f span=%.4f err/span=%.4f epochs=%zu stop=%s",
                  det.clips, det.events, rep.holdout ? rep.holdout->clips : 0, rep.holdout ? rep.holdout->pairs : 0,
                  acc, rep.holdout ? rep.holdout->mean_error : 0.0, rep.coordinate_span, frac, rep.epochs,
                  rep.stop_reason.c_str());
    c.detail << buf;
    c.require(rep.holdout.has_value() && rep.holdout->clips == 20, "20% of sounds held out");
    c.require(acc >= 0.8, "nearest-cluster accuracy >= 0.8");
    c.require(frac < 0.25, "error < 25% of span");
    c.require(t < 300.0, "runtime < 5 min");
    return report("end_to_end", c, t);
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<bool()>>> checks{
        {"geometry", geometry},
        {"features", features},
        {"detector", detector},
        {"manifold", manifold},
        {"manifold_neighborhood_preservation", manifold_neighborhood_preservation},
        {"regressor", regressor},
        {"end_to_end", end_to_end},
    };
    const std::string mode = argc > 1 ? argv[1] : "all";
    bool ok = true, found = false;
    for (const auto& [name, fn] : checks) {
        if (mode != "all" && mode != name) continue;
        found = true;
        try {
            ok = fn() && ok;
        } catch (const std::exception& e) {
            std::printf("FAIL %s: exception: %s\n", name.c_str(), e.what());
            ok = false;
        }
    }
    if (!found) {
        std::fprintf(stderr, "unknown criterion '%s'\n", mode.c_str());
        return 2;
    }
    return ok ? 0 : 1;
}
