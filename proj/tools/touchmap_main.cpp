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

// touchmap: command-line driver for the synth -> detect -> reduce -> train
// pipeline. Exit codes: 0 success, 1 failure, 2 configuration or usage error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "touchmap/corpus.hpp"
#include "touchmap/error.hpp"
#include "touchmap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace touchmap;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool deterministic = false;
    std::string out;
    bool print_config = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Override the seed");
    app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--deterministic", c.deterministic, "Force single-threaded execution");
    app->add_option("--out", c.out, "Output location");
    app->add_flag("--print-config", c.print_config, "Print the effective config and exit");
}

PipelineConfig effective_config(const Common& c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.jobs) cfg.jobs = *c.jobs;
    if (c.deterministic) cfg.deterministic = true;
    if (!c.out.empty()) cfg.paths.out = c.out;
    cfg.finalize();
    return cfg;
}

// Flag value if given, else the config path, else a usage error.
std::string need(const std::string& flag_value, const std::string& config_value, const char* flag) {
    if (!flag_value.empty()) return flag_value;
    if (!config_value.empty()) return config_value;
    throw CLI::ValidationError(std::string(flag), "required (flag or paths section of the config)");
}

void print_failures(const std::vector<FileError>& failures) {
    for (const auto& f : failures) std::cerr << "error: " << f.file << ": " << f.message << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_report(const TrainEvalReport& rep) {
    for (const auto& e : rep.join_errors) std::cerr << "join error: " << e << '\n';
    for (const auto& n : rep.notes) std::cout << "note: " << n << '\n';
    auto line = [](const char* name, const SplitMetrics& m) {
        std::printf("%-8s pairs %zu  clips %zu  mean error %.4f", name, m.pairs, m.clips, m.mean_error);
        if (m.nearest_cluster_accuracy) std::printf("  nearest-cluster accuracy %.3f", *m.nearest_cluster_accuracy);
        std::printf("\n");
    };
    line("train", rep.train);
    if (rep.holdout) line("holdout", *rep.holdout);
    std::printf("coordinate span %.4f", rep.coordinate_span);
    if (const auto f = rep.holdout_error_fraction()) std::printf("  held-out error / span %.4f", *f);
    std::printf("\n");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"touchmap: map touch sounds to a visual-context manifold"};
    app.require_subcommand(1);
    Common common;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    std::string spec_path;
    std::optional<int> n_clips;
    bool blind = false;
    add_common(synth, common);
    synth->add_option("--spec", spec_path, "Corpus spec JSON (defaults to the standard corpus)")
        ->check(CLI::ExistingFile);
    synth->add_option("--n-clips", n_clips, "Override the number of clips")->check(CLI::PositiveNumber);
    synth->add_flag("--blind", blind, "Omit class labels from the manifest");

    auto* features = app.add_subcommand("features", "Write per-frame feature tracks for WAV files");
    std::string audio;
    add_common(features, common);
    features->add_option("--audio", audio, "WAV file or directory");

    auto* detect = app.add_subcommand("detect", "Detect impact events and extract segments");
    add_common(detect, common);
    detect->add_option("--audio", audio, "Directory of WAV files");

    auto* reduce = app.add_subcommand("reduce", "Reduce image embeddings to 2-D coordinates");
    std::string embeddings, manifest;
    add_common(reduce, common);
    reduce->add_option("--embeddings", embeddings, "Embedding CSV or binary blob");
    reduce->add_option("--manifest", manifest, "Manifest for point labels (optional)");

    auto* trn = app.add_subcommand("train", "Train the sound-to-coordinate regressor");
    std::string segments, coords;
    std::optional<double> holdout;
    add_common(trn, common);
    trn->add_option("--segments", segments, "Directory of segment WAVs");
    trn->add_option("--coords", coords, "Coordinates CSV");
    trn->add_option("--manifest", manifest, "Manifest joining clips to embedding rows");
    trn->add_option("--holdout", holdout, "Fraction of clips held out")->check(CLI::Range(0.0, 1.0));

    auto* evl = app.add_subcommand("eval", "Evaluate a trained regressor");
    std::string model, split_file;
    add_common(evl, common);
    evl->add_option("--model", model, "Model header JSON");
    evl->add_option("--segments", segments, "Directory of segment WAVs");
    evl->add_option("--coords", coords, "Coordinates CSV");
    evl->add_option("--manifest", manifest, "Manifest joining clips to embedding rows");
    evl->add_option("--split", split_file, "split.csv from train (optional)");

    auto* plot = app.add_subcommand("plot", "Render coordinates and predictions as SVG");
    std::string predictions, plot_split = "holdout";
    add_common(plot, common);
    plot->add_option("--coords", coords, "Coordinates CSV");
    plot->add_option("--manifest", manifest, "Manifest for point labels (optional)");
    plot->add_option("--predictions", predictions, "predictions.csv (optional)");
    plot->add_option("--split", plot_split, "Which predictions to draw");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        PipelineConfig cfg = effective_config(common);
        if (holdout) {
            cfg.holdout_frac = *holdout;
            cfg.finalize();
        }
        if (common.print_config) {
            std::cout << config_to_json(cfg);
            return 0;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path out = cfg.paths.out;

        if (*synth) {
            SynthSpec spec = SynthSpec::standard();
            if (!spec_path.empty()) {
                std::ifstream in(spec_path);
                std::stringstream ss;
                ss << in.rdbuf();
                spec = spec_from_json(ss.str());
            }
            if (n_clips) spec.n_clips = *n_clips;
            if (common.seed) spec.seed = *common.seed;
            spec.validate();
            const auto corpus = synth_audio(spec, cfg.effective_jobs());
            write_corpus(out, spec, corpus, blind);
            std::printf("synth: %zu clips written to %s (%.1f s)\n", corpus.clips.size(), out.string().c_str(),
                        seconds_since(t0));
            return 0;
        }
        if (*features) {
            const auto rep = run_features(need(audio, cfg.paths.audio_dir, "--audio"), cfg, out);
            print_failures(rep.failures);
            std::printf("features: %zu files, %zu frames (%.1f s)\n", rep.files, rep.frames, seconds_since(t0));
            return rep.files == 0 && !rep.failures.empty() ? 1 : 0;
        }
        if (*detect) {
            const auto rep = run_detect(need(audio, cfg.paths.audio_dir, "--audio"), cfg, out);
            for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
            print_failures(rep.failures);
            std::printf("detect: %zu clips, %zu events, %.2f events/clip, %.2f events/min (%.1f s)\n", rep.clips,
                        rep.events, rep.events_per_clip(),
                        rep.audio_seconds > 0 ? 60.0 * static_cast<double>(rep.events) / rep.audio_seconds : 0.0,
                        seconds_since(t0));
            if (!rep.failures.empty())
                std::printf("detect: %zu files failed\n", rep.failures.size());
            return rep.clips == 0 && !rep.failures.empty() ? 1 : 0;
        }
        if (*reduce) {
            std::optional<fs::path> man;
            if (!manifest.empty() || !cfg.paths.manifest.empty()) man = need(manifest, cfg.paths.manifest, "--manifest");
            const auto rep = run_reduce(need(embeddings, cfg.paths.embeddings, "--embeddings"), cfg, out, man);
            std::printf("reduce: %zu points of dimension %zu -> %s (%.1f s)\n", rep.points, rep.dim,
                        (out / "coords.csv").string().c_str(), seconds_since(t0));
            return 0;
        }
        if (*trn) {
            const auto rep = run_train_eval(need(segments, cfg.paths.segments_dir, "--segments"),
                                            need(coords, cfg.paths.coords, "--coords"),
                                            need(manifest, cfg.paths.manifest, "--manifest"), cfg, out);
            print_report(rep);
            std::printf("train: %zu epochs, %lld steps, stopped by %s (%.1f s)\n", rep.epochs, rep.steps,
                        rep.stop_reason.c_str(), seconds_since(t0));
            return 0;
        }
        if (*evl) {
            std::optional<fs::path> split_path;
            if (!split_file.empty()) split_path = split_file;
            const auto rep = run_eval(need(model, cfg.paths.model, "--model"),
                                      need(segments, cfg.paths.segments_dir, "--segments"),
                                      need(coords, cfg.paths.coords, "--coords"),
                                      need(manifest, cfg.paths.manifest, "--manifest"), cfg, out, split_path);
            print_report(rep);
            return 0;
        }
        if (*plot) {
            const auto c = read_coords_csv(need(coords, cfg.paths.coords, "--coords"));
            std::vector<std::string> labels;
            if (!manifest.empty() || !cfg.paths.manifest.empty())
                labels = labels_from_manifest(read_manifest(need(manifest, cfg.paths.manifest, "--manifest")), c.size());
            std::vector<Prediction> shown;
            std::optional<ErrorPatch> patch;
            if (!predictions.empty()) {
                const auto preds = read_predictions_csv(predictions);
                for (const auto& p : preds)
                    if (p.split == plot_split) shown.push_back(p);
                patch = error_patch(preds, plot_split);
            }
            fs::path target = out;
            if (target.extension() != ".svg") {
                fs::create_directories(target);
                target /= "plot.svg";
            } else if (target.has_parent_path()) {
                fs::create_directories(target.parent_path());
            }
            std::ofstream svg(target);
            if (!svg) throw Error("cannot write " + target.string());
            svg << render_svg(c, labels, shown, patch);
            std::printf("plot: %s\n", target.string().c_str());
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
