#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "actseg/cli.hpp"
#include "actseg/config.hpp"
#include "actseg/data_io.hpp"
#include "actseg/error.hpp"

using namespace actseg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

// One small dataset shared by the tests in this file.
struct Fixture {
  fs::path root;
  fs::path manifest;
  std::vector<std::string> small;  ///< config overrides that keep runs fast

  Fixture() {
    root = fs::temp_directory_path() / ("actseg_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    small = {"--set", "synth_videos_per_task=4", "--set", "synth_min_frames=16",
             "--set", "synth_max_frames=24",     "--set", "synth_feature_dim=6"};
    std::vector<std::string> args = {"synth", "--out", (root / "data").string()};
    args.insert(args.end(), small.begin(), small.end());
    REQUIRE(run(args).code == 0);
    manifest = root / "data" / "manifest.tsv";
  }
  ~Fixture() { fs::remove_all(root); }

  std::vector<std::string> train_args(const fs::path& out, std::size_t epochs) const {
    return {"train", "--manifest", manifest.string(), "--out", out.string(),
            "--set", "epochs=" + std::to_string(epochs), "--set", "num_candidates=4",
            "--set", "hidden_dims=8", "--set", "state_dim=6"};
  }
};

}  // namespace

TEST_CASE("synth writes the default number of videos") {
  const fs::path dir = fs::temp_directory_path() / ("actseg_cli_synth_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  auto r = run({"synth", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  auto m = load_manifest(dir / "a" / "manifest.tsv");
  CHECK(m.entries.size() == 20);
  CHECK(m.num_actions == 4);
  CHECK(m.feature_dim == 16);
  CHECK(fs::exists(dir / "a" / "config.txt"));

  REQUIRE(run({"synth", "--out", (dir / "b").string()}).code == 0);
  for (const auto& e : m.entries) {
    CHECK(slurp(dir / "a" / e.features_path) == slurp(dir / "b" / e.features_path));
    CHECK(slurp(dir / "a" / *e.labels_path) == slurp(dir / "b" / *e.labels_path));
  }
  REQUIRE(run({"synth", "--out", (dir / "c").string(), "--seed", "8"}).code == 0);
  CHECK(slurp(dir / "a" / m.entries[0].features_path) !=
        slurp(dir / "c" / m.entries[0].features_path));

  auto bad = run({"synth", "--out", (dir / "d").string(), "--set", "synth_k=1"});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("error:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"train"}).code == 1);
  auto unknown = run({"synth", "--out", "/tmp/unused", "--set", "no_such_key=1"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("no_such_key") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("train, segment, eval end to end") {
  Fixture fx;
  const fs::path run1 = fx.root / "run1";
  auto t = run(fx.train_args(run1, 1));
  REQUIRE(t.code == 0);
  CHECK(fs::exists(run1 / "model.ssam"));
  auto history = lines_of(run1 / "history.csv");
  REQUIRE(history.size() == 2);
  CHECK(history[0].find("mof") != std::string::npos);
  CHECK(history[1].rfind("1,", 0) == 0);
  CHECK(fs::exists(run1 / "costs.csv"));
  CHECK(fs::exists(run1 / "candidates.tsv"));
  CHECK(slurp(run1 / "config.txt").find("epochs = 1") != std::string::npos);

  SUBCASE("resume continues the epoch counter") {
    auto args = fx.train_args(run1, 3);
    args.push_back("--resume");
    args.push_back((run1 / "model.ssam").string());
    REQUIRE(run(args).code == 0);
    auto h = lines_of(run1 / "history.csv");
    REQUIRE(h.size() == 4);
    CHECK(h[3].rfind("3,", 0) == 0);

    // the chunked run equals an uninterrupted one
    const fs::path run2 = fx.root / "run2";
    REQUIRE(run(fx.train_args(run2, 3)).code == 0);
    CHECK(slurp(run2 / "model.ssam") == slurp(run1 / "model.ssam"));
    CHECK(slurp(run2 / "history.csv") == slurp(run1 / "history.csv"));

    auto past = fx.train_args(fx.root / "run3", 2);
    past.push_back("--resume");
    past.push_back((run1 / "model.ssam").string());
    CHECK(run(past).code == 1);
  }

  SUBCASE("segment writes one label per frame, deterministically") {
    const fs::path seg = fx.root / "seg";
    REQUIRE(run({"segment", "--checkpoint", (run1 / "model.ssam").string(), "--manifest",
                 fx.manifest.string(), "--out", seg.string()})
                .code == 0);
    auto videos = load_dataset(fx.manifest);
    for (const auto& v : videos) {
      CHECK(lines_of(seg / (v.video_id + ".txt")).size() == v.length());
      const std::string svg = slurp(seg / (v.video_id + ".svg"));
      CHECK(svg.rfind("<svg", 0) == 0);
      CHECK(svg.find("class=\"pred\"") != std::string::npos);
      CHECK(svg.find("class=\"gt\"") != std::string::npos);
      CHECK(svg.find("</svg>") != std::string::npos);
    }
    const fs::path seg2 = fx.root / "seg2";
    REQUIRE(run({"segment", "--checkpoint", (run1 / "model.ssam").string(), "--manifest",
                 fx.manifest.string(), "--out", seg2.string(), "--no-svg"})
                .code == 0);
    CHECK_FALSE(fs::exists(seg2 / (videos[0].video_id + ".svg")));
    for (const auto& v : videos) {
      CHECK(slurp(seg / (v.video_id + ".txt")) == slurp(seg2 / (v.video_id + ".txt")));
    }
  }
}

TEST_CASE("eval on ground truth and on missing predictions") {
  Fixture fx;
  const fs::path gt_dir = fx.root / "data" / "labels";
  const fs::path out = fx.root / "eval";
  auto r = run({"eval", "--manifest", fx.manifest.string(), "--predictions", gt_dir.string(),
                "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("MoF 1") != std::string::npos);
  auto rows = lines_of(out / "metrics.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("scope,task_id,videos,frames,mof,f1,jaccard", 0) == 0);
  CHECK(rows[1].rfind("task,", 0) == 0);
  CHECK(rows[2].rfind("mean,", 0) == 0);
  CHECK(rows[2].find(",1,1,1,") != std::string::npos);

  auto first = load_manifest(fx.manifest).entries[0].video_id;
  fs::remove(gt_dir / (first + ".txt"));
  auto missing = run({"eval", "--manifest", fx.manifest.string(), "--predictions",
                      gt_dir.string(), "--out", out.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find(first) != std::string::npos);
}

TEST_CASE("sweep writes one summary row per value") {
  Fixture fx;
  const fs::path out = fx.root / "sweep";
  std::vector<std::string> args = {"sweep", "--manifest", fx.manifest.string(), "--out",
                                   out.string(), "--key", "num_actions", "--values", "3,4,5",
                                   "--set", "epochs=1", "--set", "num_candidates=2"};
  REQUIRE(run(args).code == 0);
  auto rows = lines_of(out / "summary.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("key,value,epochs,final_cost,mof", 0) == 0);
  CHECK(rows[1].rfind("num_actions,3,", 0) == 0);
  CHECK(rows[3].rfind("num_actions,5,", 0) == 0);
  CHECK(slurp(out / "num_actions-4" / "config.txt").find("num_actions = 4") != std::string::npos);

  args[6] = "bogus_key";
  CHECK(run(args).code == 1);
}

TEST_CASE("run config presets and overrides") {
  RunConfig c;
  CHECK(c.train_config().ranking.gamma1 == std::nullopt);
  c.set("ablation", "c2");
  auto t = c.train_config();
  CHECK(t.ranking.gamma1 == 0.0);
  CHECK(t.ranking.gamma2 == std::nullopt);
  CHECK(t.ranking.gamma3 == 0.0);
  c.set("ablation", "random-pick");
  CHECK(c.train_config().pick == CandidatePick::kRandom);
  c.set("ablation", "no_gumbel");
  CHECK(c.train_config().greedy_e_step);
  c.set("ablation", "bogus");
  CHECK_THROWS_AS(c.train_config(), ParameterError);
  CHECK_THROWS_AS(c.set("nope", "1"), ParameterError);
  CHECK_THROWS_AS(c.set_assignment("no equals sign"), ParameterError);

  RunConfig k;
  CHECK(k.model_config(16, 5).num_actions == 5);
  k.set("num_actions", "6");
  CHECK(k.model_config(16, 5).num_actions == 6);
  CHECK(k.model_config(16, 5).cross_projection_dim == 0);

  const fs::path file = fs::temp_directory_path() / ("actseg_cfg_" + std::to_string(::getpid()));
  {
    std::ofstream os(file);
    os << "# comment\nepochs = 12\n\nlearning_rate=0.01  # trailing\n";
  }
  RunConfig f;
  f.load_file(file);
  CHECK(f.train_config().epochs == 12);
  CHECK(f.train_config().adam.learning_rate == 0.01);
  CHECK(f.to_text().find("epochs = 12") != std::string::npos);
  fs::remove(file);
}
