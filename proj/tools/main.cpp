#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adafocus/config_json.hpp"
#include "adafocus/corpus.hpp"
#include "adafocus/errors.hpp"
#include "adafocus/focus.hpp"
#include "adafocus/metrics.hpp"
#include "adafocus/model.hpp"
#include "adafocus/textio.hpp"
#include "adafocus/trainer.hpp"

namespace fs = std::filesystem;
using namespace adafocus;

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw InputError("write failed: " + path.string());
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string signed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.4f", v);
  return buf;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const std::string& config_path, const std::string& out_path) {
  const CorpusConfig cfg = load_corpus_config_file(config_path);
  const Corpus corpus = generate_corpus(cfg);
  write_corpus_file(out_path, corpus);

  std::cout << "corpus written: " << out_path << "\n"
            << "videos: " << cfg.num_videos << " (train " << corpus.train.size()
            << " / test " << corpus.test.size() << "), T=" << cfg.clips_per_video
            << ", K=" << cfg.num_classes << ", feature_dim=" << cfg.feature_dim
            << "\n"
            << "noise rate: overall " << fixed4(noise_rate(corpus)) << " (train "
            << fixed4(noise_rate(std::span<const LongVideo>(corpus.train)))
            << ", test "
            << fixed4(noise_rate(std::span<const LongVideo>(corpus.test)))
            << ")\n";
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArtifacts {
  fs::path history;
  fs::path checkpoint;
  fs::path table;
};

TrainArtifacts run_and_dump(const Corpus& corpus, const TrainConfig& cfg,
                            const fs::path& out_dir,
                            const std::string& corpus_label, bool verbose) {
  fs::create_directories(out_dir);

  nlohmann::json echo{{"corpus_file", corpus_label},
                      {"train", train_config_to_json(cfg)}};
  write_text_file(out_dir / "config.json", echo.dump(2) + "\n");

  TrainHooks hooks;
  if (verbose) {
    hooks.on_epoch_end = [](const EpochRecord& r, const Model&,
                            const SaliencyTable&) {
      std::cout << "epoch " << r.epoch << ": gamma " << fixed4(r.gamma)
                << ", train mAP " << fixed4(r.train_map) << ", test mAP "
                << fixed4(r.test_map) << ", ratio " <<
          fixed4(r.ratio_above_threshold) << ", top1 " << fixed4(r.top1_success)
                << "\n";
    };
  }
  const TrainResult result = train(corpus, cfg, verbose ? &hooks : nullptr);

  TrainArtifacts artifacts{out_dir / "history.csv", out_dir / "checkpoint.json",
                           out_dir / "saliency_table.csv"};
  write_history_file(artifacts.history.string(), result.history);
  write_checkpoint(artifacts.checkpoint.string(), result.model);
  write_table_file(artifacts.table.string(), result.table);

  const EpochRecord& last = result.history.back();
  std::cout << "regime " << to_string(cfg.regime) << " seed " << cfg.seed
            << ": final test mAP " << fixed4(last.test_map) << " (train mAP "
            << fixed4(last.train_map) << ")\n"
            << "final epoch: gamma " << fixed4(last.gamma)
            << ", ratio_above_threshold " << fixed4(last.ratio_above_threshold)
            << ", top1_success " << fixed4(last.top1_success)
            << ", mask coverage " << fixed4(last.mask_coverage) << "\n";
  return artifacts;
}

// ----------------------------------------------------------------- compare

struct CellResult {
  bool ok = false;
  bool numeric_failure = false;
  double test_map = 0.0;
  std::string error;
};

int cmd_compare(const std::string& spec_path, const std::string& out_dir,
                std::optional<int> jobs_override) {
  const ExperimentSpec spec = load_experiment_spec_file(spec_path);
  const fs::path out(out_dir);
  fs::create_directories(out / "cells");

  Corpus corpus = spec.has_inline_corpus ? generate_corpus(spec.corpus)
                                         : read_corpus_file(spec.corpus_file);
  const std::string corpus_label =
      spec.has_inline_corpus ? "<inline>" : spec.corpus_file;

  // Echo the fully resolved spec next to the results.
  {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : spec.runs) {
      nlohmann::json rj = train_config_to_json(run.config);
      rj["name"] = run.name;
      runs.push_back(rj);
    }
    nlohmann::json echo{{"corpus", corpus_config_to_json(corpus.config)},
                        {"runs", runs},
                        {"seeds", spec.seeds}};
    write_text_file(out / "spec.json", echo.dump(2) + "\n");
  }

  const int n_runs = static_cast<int>(spec.runs.size());
  const int n_seeds = static_cast<int>(spec.seeds.size());
  const int n_cells = n_runs * n_seeds;
  std::vector<CellResult> cells(n_cells);

  int jobs = jobs_override.value_or(spec.jobs);
  jobs = std::clamp(jobs, 1, std::max(1, n_cells));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int cell = next.fetch_add(1);
      if (cell >= n_cells) return;
      const RunSpec& run = spec.runs[cell / n_seeds];
      const std::uint64_t seed = spec.seeds[cell % n_seeds];
      TrainConfig cfg = run.config;
      cfg.seed = seed;
      const fs::path cell_dir =
          out / "cells" / (run.name + "_seed" + std::to_string(seed));
      CellResult& result = cells[cell];
      try {
        fs::create_directories(cell_dir);
        nlohmann::json echo{{"corpus_file", corpus_label},
                            {"train", train_config_to_json(cfg)}};
        write_text_file(cell_dir / "config.json", echo.dump(2) + "\n");

        const TrainResult tr = train(corpus, cfg);
        write_history_file((cell_dir / "history.csv").string(), tr.history);
        write_checkpoint((cell_dir / "checkpoint.json").string(), tr.model);
        write_table_file((cell_dir / "saliency_table.csv").string(), tr.table);
        result.test_map = tr.history.back().test_map;
        result.ok = true;
      } catch (const NumericError& e) {
        result.numeric_failure = true;
        result.error = e.what();
      } catch (const std::exception& e) {
        result.error = e.what();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Baseline for deltas: the first weak_noisy row, when present and clean.
  int baseline_row = -1;
  for (int r = 0; r < n_runs; ++r)
    if (spec.runs[r].config.regime == Regime::weak_noisy) {
      baseline_row = r;
      break;
    }

  auto row_cells_ok = [&](int r) {
    for (int s = 0; s < n_seeds; ++s)
      if (!cells[r * n_seeds + s].ok) return false;
    return true;
  };
  auto row_median = [&](int r) {
    std::vector<double> maps;
    for (int s = 0; s < n_seeds; ++s)
      if (cells[r * n_seeds + s].ok) maps.push_back(cells[r * n_seeds + s].test_map);
    return median(std::move(maps));
  };
  const bool have_baseline = baseline_row >= 0 && row_cells_ok(baseline_row);
  const double baseline_median = have_baseline ? row_median(baseline_row) : 0.0;

  // CSV table.
  std::string csv = "name,regime";
  for (auto seed : spec.seeds) csv += ",map_seed_" + std::to_string(seed);
  csv += ",median_test_map,delta_vs_weak_noisy,status\n";
  for (int r = 0; r < n_runs; ++r) {
    const RunSpec& run = spec.runs[r];
    csv += run.name;
    csv += ',';
    csv += to_string(run.config.regime);
    bool any_failed = false;
    bool any_ok = false;
    for (int s = 0; s < n_seeds; ++s) {
      const CellResult& cell = cells[r * n_seeds + s];
      csv += ',';
      if (cell.ok) {
        csv += fmt_g9(cell.test_map);
        any_ok = true;
      } else {
        csv += "failed";
        any_failed = true;
      }
    }
    csv += ',';
    csv += any_ok ? fmt_g9(row_median(r)) : "failed";
    csv += ',';
    if (have_baseline && any_ok && r != baseline_row)
      csv += fmt_g9(row_median(r) - baseline_median);
    else
      csv += "n/a";
    csv += ',';
    csv += any_failed ? "failed" : "ok";
    csv += '\n';
  }
  write_text_file(out / "compare.csv", csv);

  // Aligned text table.
  std::size_t name_width = 4;
  for (const auto& run : spec.runs) name_width = std::max(name_width, run.name.size());
  std::ostringstream txt;
  txt << std::left;
  txt.width(static_cast<std::streamsize>(name_width + 2));
  txt << "run";
  txt << std::left << "regime         ";
  for (auto seed : spec.seeds) {
    std::string head = "seed=" + std::to_string(seed);
    head.resize(std::max<std::size_t>(head.size(), 9), ' ');
    txt << head;
  }
  txt << "median    delta\n";
  for (int r = 0; r < n_runs; ++r) {
    const RunSpec& run = spec.runs[r];
    std::string name = run.name;
    name.resize(name_width + 2, ' ');
    std::string regime = to_string(run.config.regime);
    regime.resize(15, ' ');
    txt << name << regime;
    bool any_ok = false;
    for (int s = 0; s < n_seeds; ++s) {
      const CellResult& cell = cells[r * n_seeds + s];
      std::string v = cell.ok ? fixed4(cell.test_map) : "failed";
      if (cell.ok) any_ok = true;
      v.resize(9, ' ');
      txt << v;
    }
    std::string med = any_ok ? fixed4(row_median(r)) : "failed";
    med.resize(10, ' ');
    txt << med;
    if (have_baseline && any_ok && r != baseline_row)
      txt << signed4(row_median(r) - baseline_median);
    else
      txt << (r == baseline_row && have_baseline ? "baseline" : "n/a");
    txt << '\n';
  }
  write_text_file(out / "compare.txt", txt.str());
  std::cout << txt.str();

  bool any_numeric = false;
  bool all_ok = true;
  for (const auto& cell : cells) {
    if (!cell.ok) {
      all_ok = false;
      if (cell.numeric_failure) any_numeric = true;
    }
  }
  if (!all_ok) {
    for (int i = 0; i < n_cells; ++i)
      if (!cells[i].ok)
        std::cerr << "cell " << spec.runs[i / n_seeds].name << "_seed"
                  << spec.seeds[i % n_seeds] << " failed: " << cells[i].error
                  << "\n";
    return any_numeric ? 3 : 2;
  }
  return 0;
}

// ---------------------------------------------------------------- diagnose

int cmd_diagnose(const std::string& checkpoint_path,
                 const std::string& corpus_path, const std::string& out_dir,
                 const std::string& split, int max_videos) {
  const Model model = read_checkpoint(checkpoint_path);
  const Corpus corpus = read_corpus_file(corpus_path);
  if (model.feature_dim() != corpus.config.feature_dim ||
      model.num_classes() != corpus.config.num_classes)
    throw InputError("checkpoint shape (D=" +
                     std::to_string(model.feature_dim()) +
                     ", K=" + std::to_string(model.num_classes()) +
                     ") does not match corpus (D=" +
                     std::to_string(corpus.config.feature_dim) +
                     ", K=" + std::to_string(corpus.config.num_classes) + ")");

  std::vector<const LongVideo*> selected;
  auto add = [&](const std::vector<LongVideo>& vs) {
    for (const auto& v : vs) selected.push_back(&v);
  };
  if (split == "train") add(corpus.train);
  else if (split == "test") add(corpus.test);
  else if (split == "all") { add(corpus.train); add(corpus.test); }
  else throw ConfigError("split must be train, test or all");
  std::sort(selected.begin(), selected.end(),
            [](const LongVideo* a, const LongVideo* b) {
              return a->video_id < b->video_id;
            });
  if (max_videos > 0 && static_cast<int>(selected.size()) > max_videos)
    selected.resize(max_videos);
  if (selected.empty()) throw InputError("diagnose: no videos selected");

  const fs::path out(out_dir);
  fs::create_directories(out);

  // Saliency reconstructed from the checkpoint by full-pass estimation.
  SaliencyTable table;
  std::vector<double> score_matrix;
  std::vector<LongVideo> flat;
  flat.reserve(selected.size());
  for (const LongVideo* v : selected) flat.push_back(*v);
  for (const LongVideo* v : selected) {
    score_matrix.clear();
    for (int t = 1; t <= v->clips; ++t) {
      const std::vector<double> p = model.forward(v->clip_features(t));
      score_matrix.insert(score_matrix.end(), p.begin(), p.end());
    }
    for (const ClassEstimate& est :
         estimate_naive(score_matrix, v->clips, v->num_classes, v->video_labels))
      table.set_entry(v->video_id, est.class_id,
                      SaliencyEntry{est.lambda, est.spike_a});
  }
  write_table_file((out / "saliency_table.csv").string(), table);

  // Timelines.
  std::size_t rows = 0;
  {
    std::ofstream tl(out / "timelines.csv", std::ios::binary);
    if (!tl) throw InputError("cannot open for writing: timelines.csv");
    write_timeline_header(tl);
    for (const LongVideo* v : selected) {
      const auto timelines = action_timeline(model, *v);
      write_timeline(tl, *v, timelines);
      rows += timelines.size() * static_cast<std::size_t>(v->clips);
    }
  }

  // Top-N report for N in {1, 2, 3}.
  std::string report = "n,success_ratio\n";
  std::cout << "top-N success ratio over " << split << " split ("
            << selected.size() << " videos, " << table.size()
            << " instances):\n";
  for (int n = 1; n <= 3; ++n) {
    const double ratio = topn_success_ratio(model, flat, n);
    report += std::to_string(n) + "," + fmt_g9(ratio) + "\n";
    std::cout << "  N=" << n << ": " << fixed4(ratio) << "\n";
  }
  write_text_file(out / "topn_report.csv", report);

  FocusConfig focus_defaults;
  std::cout << "ratio above threshold (theta=" << focus_defaults.theta
            << "): "
            << fixed4(ratio_above_threshold(model, flat, table,
                                            focus_defaults.theta))
            << "\n";

  std::cout << "timelines: " << (out / "timelines.csv").string() << " (" << rows
            << " rows)\n"
            << "table dump: " << (out / "saliency_table.csv").string() << " ("
            << table.size() << " entries)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised long-video training lab: synthetic corpora, "
               "adaptive action/clip focusing, regime comparisons"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic corpus file");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "corpus config JSON")->required();
  gen->add_option("--out", gen_out, "output corpus file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one model on a corpus file");
  std::string tr_corpus, tr_out, tr_config, tr_regime, tr_weight_kind;
  std::uint64_t tr_seed = 0;
  int tr_epochs = 0, tr_iters = 0, tr_batch = 0, tr_hidden = -1, tr_views = 0;
  double tr_lr = 0.0, tr_momentum = -1.0, tr_theta = 0.0, tr_alpha = 0.0,
         tr_beta = 0.0, tr_warmup = -1.0;
  bool tr_no_action = false, tr_no_clip = false, tr_verbose = false;
  tr->add_option("--corpus", tr_corpus, "corpus file")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--config", tr_config, "train config JSON (optional)");
  tr->add_option("--regime", tr_regime,
                 "full_clean | weak_noisy | weak_adafocus");
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--epochs", tr_epochs, "number of epochs");
  tr->add_option("--iterations", tr_iters, "iterations per epoch (0 = auto)");
  tr->add_option("--batch", tr_batch, "clips per iteration");
  tr->add_option("--hidden", tr_hidden, "hidden units (0 = linear)");
  tr->add_option("--views", tr_views, "temporal views for evaluation");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--momentum", tr_momentum, "SGD momentum");
  tr->add_option("--theta", tr_theta, "actionness threshold scale");
  tr->add_option("--alpha", tr_alpha, "upper-branch weight scale");
  tr->add_option("--beta", tr_beta, "lower-branch decay (exponential)");
  tr->add_option("--warmup-fraction", tr_warmup, "fraction of epochs without focusing");
  tr->add_option("--weight-kind", tr_weight_kind,
                 "exponential | constant | linear | logarithmic");
  tr->add_flag("--no-action-focus", tr_no_action, "disable action focusing");
  tr->add_flag("--no-clip-focus", tr_no_clip, "disable clip focusing");
  tr->add_flag("--verbose", tr_verbose, "print per-epoch metrics");

  // compare
  auto* cmp = app.add_subcommand("compare",
                                 "Run a regimes x seeds grid and tabulate");
  std::string cmp_spec, cmp_out;
  int cmp_jobs = 0;
  cmp->add_option("--config", cmp_spec, "experiment spec JSON")->required();
  cmp->add_option("--out", cmp_out, "output directory")->required();
  cmp->add_option("--jobs", cmp_jobs, "parallel cells (default from spec)");

  // diagnose
  auto* dg = app.add_subcommand("diagnose",
                                "Timelines, top-N report and table dump");
  std::string dg_checkpoint, dg_corpus, dg_out, dg_split = "test";
  int dg_max_videos = 0;
  dg->add_option("--checkpoint", dg_checkpoint, "model checkpoint")->required();
  dg->add_option("--corpus", dg_corpus, "corpus file")->required();
  dg->add_option("--out", dg_out, "output directory")->required();
  dg->add_option("--split", dg_split, "train | test | all (default test)");
  dg->add_option("--max-videos", dg_max_videos, "limit videos (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_config, gen_out);

    if (tr->parsed()) {
      const Corpus corpus = read_corpus_file(tr_corpus);
      TrainConfig cfg;
      if (!tr_config.empty()) {
        std::ifstream in(tr_config, std::ios::binary);
        if (!in) throw InputError("cannot open train config: " + tr_config);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError("train config " + tr_config + ": " + e.what());
        }
        apply_train_overlay(cfg, j);
      }
      if (tr->count("--regime")) cfg.regime = regime_from_string(tr_regime);
      else if (tr_config.empty())
        throw ConfigError("train: --regime (or --config) is required");
      if (tr->count("--seed")) cfg.seed = tr_seed;
      if (tr->count("--epochs")) cfg.epochs = tr_epochs;
      if (tr->count("--iterations")) cfg.iterations_per_epoch = tr_iters;
      if (tr->count("--batch")) cfg.batch_size = tr_batch;
      if (tr->count("--hidden")) cfg.hidden = tr_hidden;
      if (tr->count("--views")) cfg.eval_views_t = tr_views;
      if (tr->count("--lr")) cfg.learning_rate = tr_lr;
      if (tr->count("--momentum")) cfg.momentum = tr_momentum;
      if (tr->count("--theta")) cfg.focus.theta = tr_theta;
      if (tr->count("--alpha")) cfg.focus.alpha = tr_alpha;
      if (tr->count("--beta")) cfg.focus.beta = tr_beta;
      if (tr->count("--warmup-fraction")) cfg.focus.warmup_fraction = tr_warmup;
      if (tr->count("--weight-kind"))
        cfg.focus.weight_kind = weight_kind_from_string(tr_weight_kind);
      if (tr_no_action) cfg.focus.use_action_focus = false;
      if (tr_no_clip) cfg.focus.use_clip_focus = false;
      cfg.validate();
      run_and_dump(corpus, cfg, tr_out, tr_corpus, tr_verbose);
      return 0;
    }

    if (cmp->parsed())
      return cmd_compare(cmp_spec, cmp_out,
                         cmp->count("--jobs") ? std::optional<int>(cmp_jobs)
                                              : std::nullopt);

    if (dg->parsed())
      return cmd_diagnose(dg_checkpoint, dg_corpus, dg_out, dg_split,
                          dg_max_videos);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
