#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "adafocus/corpus.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = ADAFOCUS_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd =
      std::string("\"") + kCli + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

int line_count(const std::string& text) {
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

struct CliDir {
  fs::path root;
  explicit CliDir(const char* name) : root(name) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~CliDir() { fs::remove_all(root); }
  fs::path operator/(const char* p) const { return root / p; }
};

const char* kCorpusConfig = R"({
  "num_videos": 10, "clips_per_video": 8, "num_classes": 3, "feature_dim": 4,
  "actions_per_video": [1, 2], "interval_length": [2, 4],
  "feature_noise_sigma": 0.5, "seed": 7
})";

}  // namespace

TEST_CASE("generate: record count, determinism, validation") {
  CliDir dir("cli_tmp_generate");
  write_file(dir / "corpus.json", kCorpusConfig);

  const std::string a = (dir / "a.jsonl").string();
  const std::string b = (dir / "b.jsonl").string();
  CHECK(run("generate --config " + (dir / "corpus.json").string() + " --out " + a) == 0);
  CHECK(line_count(slurp(dir / "a.jsonl")) == 11);  // header + 10 videos

  CHECK(run("generate --config " + (dir / "corpus.json").string() + " --out " + b) == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));

  // Invalid config: exit 2 and no file written.
  write_file(dir / "bad.json", R"({"num_videos": 10, "actions_per_video": [5, 9],
                                   "num_classes": 3})");
  CHECK(run("generate --config " + (dir / "bad.json").string() + " --out " +
            (dir / "bad.jsonl").string()) == 2);
  CHECK(!fs::exists(dir / "bad.jsonl"));

  // Unknown field: exit 2.
  write_file(dir / "typo.json", R"({"num_video": 10})");
  CHECK(run("generate --config " + (dir / "typo.json").string() + " --out " +
            (dir / "typo.jsonl").string()) == 2);
}

TEST_CASE("train: artifacts, validation, reduction identity") {
  CliDir dir("cli_tmp_train");
  write_file(dir / "corpus.json", kCorpusConfig);
  const std::string corpus = (dir / "corpus.jsonl").string();
  REQUIRE(run("generate --config " + (dir / "corpus.json").string() +
              " --out " + corpus) == 0);

  const std::string base = " --corpus " + corpus + " --epochs 4 --seed 5 --views 4";
  CHECK(run("train" + base + " --regime weak_noisy --out " +
            (dir / "noisy").string()) == 0);
  CHECK(fs::exists(dir / "noisy" / "history.csv"));
  CHECK(fs::exists(dir / "noisy" / "checkpoint.json"));
  CHECK(fs::exists(dir / "noisy" / "saliency_table.csv"));
  CHECK(fs::exists(dir / "noisy" / "config.json"));
  CHECK(line_count(slurp(dir / "noisy" / "history.csv")) == 5);  // header + epochs

  // Focusing disabled must reproduce the weak_noisy history exactly.
  CHECK(run("train" + base +
            " --regime weak_adafocus --no-action-focus --no-clip-focus --out " +
            (dir / "off").string()) == 0);
  CHECK(slurp(dir / "off" / "history.csv") == slurp(dir / "noisy" / "history.csv"));

  // Rejected configs and inputs exit 2.
  CHECK(run("train" + base + " --regime weak_noisy --epochs 0 --out " +
            (dir / "zero").string()) == 2);
  CHECK(run("train --corpus " + (dir / "missing.jsonl").string() +
            " --regime weak_noisy --out " + (dir / "x").string()) == 2);
  CHECK(run("train" + base + " --regime bogus --out " + (dir / "y").string()) == 2);

  // A step size past the double range blows up the loss: exit 3.
  CHECK(run("train" + base + " --regime weak_noisy --lr 1e307 --out " +
            (dir / "blowup").string()) == 3);
}

TEST_CASE("compare: grid shape and byte-identical reruns") {
  CliDir dir("cli_tmp_compare");
  write_file(dir / "spec.json", R"({
    "corpus": {"num_videos": 10, "clips_per_video": 8, "num_classes": 3,
               "feature_dim": 4, "actions_per_video": [1, 2],
               "interval_length": [2, 4], "feature_noise_sigma": 0.5, "seed": 7},
    "train": {"epochs": 4, "eval_views_t": 4, "learning_rate": 0.2},
    "runs": [{"name": "noisy", "regime": "weak_noisy"},
             {"name": "ada", "regime": "weak_adafocus"}],
    "seeds": [1, 2],
    "jobs": 2
  })");

  CHECK(run("compare --config " + (dir / "spec.json").string() + " --out " +
            (dir / "out1").string()) == 0);
  const std::string csv = slurp(dir / "out1" / "compare.csv");
  CHECK(line_count(csv) == 3);  // header + 2 runs
  CHECK(csv.find("map_seed_1") != std::string::npos);
  CHECK(csv.find("noisy,weak_noisy") != std::string::npos);
  CHECK(fs::exists(dir / "out1" / "cells" / "ada_seed2" / "history.csv"));
  CHECK(fs::exists(dir / "out1" / "spec.json"));

  CHECK(run("compare --config " + (dir / "spec.json").string() + " --out " +
            (dir / "out2").string()) == 0);
  CHECK(slurp(dir / "out2" / "compare.csv") == csv);
  CHECK(slurp(dir / "out2" / "compare.txt") == slurp(dir / "out1" / "compare.txt"));

  // Missing runs array: exit 2.
  write_file(dir / "empty.json", R"({"corpus_file": "x.jsonl", "seeds": [1]})");
  CHECK(run("compare --config " + (dir / "empty.json").string() + " --out " +
            (dir / "out3").string()) == 2);
}

TEST_CASE("diagnose: reports, row counts and shape checks") {
  CliDir dir("cli_tmp_diagnose");
  write_file(dir / "corpus.json", kCorpusConfig);
  const std::string corpus = (dir / "corpus.jsonl").string();
  REQUIRE(run("generate --config " + (dir / "corpus.json").string() +
              " --out " + corpus) == 0);
  REQUIRE(run("train --corpus " + corpus +
              " --regime weak_adafocus --epochs 6 --seed 5 --views 4 --out " +
              (dir / "run").string()) == 0);

  const std::string checkpoint = (dir / "run" / "checkpoint.json").string();
  CHECK(run("diagnose --checkpoint " + checkpoint + " --corpus " + corpus +
            " --split test --out " + (dir / "diag").string()) == 0);
  CHECK(fs::exists(dir / "diag" / "timelines.csv"));
  CHECK(fs::exists(dir / "diag" / "topn_report.csv"));
  CHECK(fs::exists(dir / "diag" / "saliency_table.csv"));

  // Timeline rows = sum over selected videos of (in-video classes x T).
  const adafocus::Corpus loaded = adafocus::read_corpus_file(corpus);
  std::size_t expected = 0;
  for (const auto& v : loaded.test) {
    std::size_t classes = 0;
    for (int k = 0; k < v.num_classes; ++k) classes += v.video_labels[k];
    expected += classes * static_cast<std::size_t>(v.clips);
  }
  CHECK(line_count(slurp(dir / "diag" / "timelines.csv")) ==
        static_cast<int>(expected) + 1);

  // Top-N report is monotone in N.
  std::istringstream report(slurp(dir / "diag" / "topn_report.csv"));
  std::string line;
  std::getline(report, line);
  CHECK(line == "n,success_ratio");
  double prev = -1.0;
  int rows = 0;
  while (std::getline(report, line)) {
    const double value = std::stod(line.substr(line.find(',') + 1));
    CHECK(value >= prev);
    prev = value;
    ++rows;
  }
  CHECK(rows == 3);

  // Mismatched checkpoint/corpus shapes: exit 2.
  write_file(dir / "other.json", R"({
    "num_videos": 6, "clips_per_video": 8, "num_classes": 3, "feature_dim": 7,
    "actions_per_video": [1, 2], "interval_length": [2, 4],
    "feature_noise_sigma": 0.5, "seed": 9
  })");
  const std::string other = (dir / "other.jsonl").string();
  REQUIRE(run("generate --config " + (dir / "other.json").string() +
              " --out " + other) == 0);
  CHECK(run("diagnose --checkpoint " + checkpoint + " --corpus " + other +
            " --out " + (dir / "diag2").string()) == 2);
}
