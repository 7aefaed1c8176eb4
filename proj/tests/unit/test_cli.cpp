#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "gsedit/cli.hpp"
#include "gsedit/errors.hpp"
#include "gsedit/image_io.hpp"
#include "synthetic.hpp"

using namespace gsedit;
using namespace gsedit::cli;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gsedit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_config(const json& doc, const fs::path& path) { std::ofstream(path) << doc.dump(2); }

int run_tool(const std::string& args) {
  const std::string cmd = std::string(GSPLAT_EDIT) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Blob fixture on disk plus a config pointing at it.
struct CliFixture {
  fs::path dir;
  test::BlobFixture blob;
  json config;

  explicit CliFixture(const std::string& name, int background = 10) {
    dir = scratch(name);
    test::BlobFixtureOptions opt;
    opt.background = background;
    blob = test::make_blob_fixture(opt);
    test::write_blob_fixture(blob, dir);
    config = {{"scene", "scene.ply"},         {"cameras", "cameras.json"}, {"images_dir", "images"},
              {"attention_dir", "attention"}, {"masks_dir", "masks"},      {"targets_dir", "targets"},
              {"keyword", blob.keyword},      {"prompt", "a green blob"},  {"log_interval", 0}};
  }
  fs::path write(const std::string& file = "config.json") const {
    write_config(config, dir / file);
    return dir / file;
  }
  RunConfig load() const { return load_run_config(write().string()); }
};

}  // namespace

// ---- config ----------------------------------------------------------------

TEST(Config, ResolvesPathsAgainstConfigDirectory) {
  CliFixture f("cfg_paths");
  const RunConfig c = f.load();
  EXPECT_EQ(fs::path(c.scene), (f.dir / "scene.ply").lexically_normal());
  EXPECT_EQ(c.edit.keyword, "blob");
  EXPECT_EQ(c.provider, "oracle");
  EXPECT_EQ(c.hash.size(), 16u);
}

TEST(Config, RejectsUnknownKeys) {
  CliFixture f("cfg_unknown");
  f.config["iteratons"] = 10;
  EXPECT_THROW(f.load(), ConfigError);
  f.config.erase("iteratons");
  f.config["weights"] = {{"lambda_l2", 1.0}};
  EXPECT_THROW(f.load(), ConfigError);
  f.config["weights"] = {{"lambda_anchor", {{"scale", 1.0}}}};
  EXPECT_THROW(f.load(), ConfigError);
}

TEST(Config, RejectsWrongTypesAndValues) {
  CliFixture f("cfg_types");
  f.config["iterations"] = "many";
  EXPECT_THROW(f.load(), ConfigError);
  f.config["iterations"] = -1;
  EXPECT_THROW(f.load(), ConfigError);
  f.config["iterations"] = 10;
  f.config["provider"] = "carrier-pigeon";
  EXPECT_THROW(f.load(), ConfigError);
  f.config["provider"] = "wire:localhost:notaport";
  EXPECT_THROW(f.load(), ConfigError);
  f.config["provider"] = "oracle";
  f.config["mode_override"] = "sideways";
  EXPECT_THROW(f.load(), ConfigError);
}

TEST(Config, RejectsMissingPaths) {
  CliFixture f("cfg_missing");
  f.config["attention_dir"] = "nowhere";
  EXPECT_THROW(f.load(), ConfigError);
  f.config.erase("attention_dir");
  f.config.erase("scene");
  EXPECT_THROW(f.load(), ConfigError);
}

TEST(Config, OverridesWinAndChangeTheHash) {
  CliFixture f("cfg_override");
  f.config["seed"] = 3;
  f.config["localize"] = {{"dbscan_eps", 2.0}, {"iou_floor", 0.4}};
  const fs::path path = f.write();
  const RunConfig base = load_run_config(path.string());
  const RunConfig over =
      load_run_config(path.string(), {{"seed", 11}, {"localize", {{"dbscan_eps", 3.5}}}, {"relocalize_labels", true}});
  EXPECT_EQ(base.edit.seed, 3u);
  EXPECT_EQ(over.edit.seed, 11u);
  EXPECT_DOUBLE_EQ(over.edit.localize.dbscan_eps, 3.5);
  EXPECT_DOUBLE_EQ(over.edit.localize.iou_floor, 0.4);
  EXPECT_TRUE(over.edit.relocalize_labels);
  EXPECT_NE(base.hash, over.hash);
  EXPECT_EQ(base.hash, load_run_config(path.string()).hash);
  EXPECT_EQ(run_directory(base, ""), fs::path(base.output_dir) / base.hash);
  EXPECT_EQ(run_directory(base, "/tmp/x"), fs::path("/tmp/x"));
}

TEST(Config, IterationsAloneKeepTheWholeRunStatic) {
  CliFixture f("cfg_static");
  f.config["iterations"] = 40;
  EXPECT_EQ(f.load().edit.static_mask_iterations, 40);
  f.config["static_mask_iterations"] = 10;
  EXPECT_EQ(f.load().edit.static_mask_iterations, 10);
}

// ---- render ----------------------------------------------------------------

TEST(Render, GoldenSceneIsByteIdentical) {
  const fs::path dir = scratch("render_golden");
  const fs::path data = fs::path(GSEDIT_TEST_DATA) / "golden";
  write_config({{"scene", (data / "scene.ply").string()}, {"cameras", (data / "cameras.json").string()}},
               dir / "config.json");
  const RunConfig c = load_run_config((dir / "config.json").string());
  const auto files = cmd_render(c, dir / "run", {});
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(slurp(files[0]), slurp(data / "0.pfm"));
  EXPECT_TRUE(fs::exists(dir / "run" / "render" / "0.png"));
}

TEST(Render, EmptySceneIsBlack) {
  const fs::path dir = scratch("render_empty");
  save_scene(GaussianScene{}, (dir / "scene.ply").string());
  save_cameras({look_at({0, 0, -3}, {0, 0, 0}, {0, -1, 0}, 16, 12, 20.0)}, (dir / "cameras.json").string());
  write_config({{"scene", "scene.ply"}, {"cameras", "cameras.json"}}, dir / "config.json");
  const auto files = cmd_render(load_run_config((dir / "config.json").string()), dir / "run", {0});
  const ImageBuffer img = read_pfm(files.at(0).string());
  EXPECT_EQ(img.width, 16);
  EXPECT_EQ(img.height, 12);
  for (float v : img.data) ASSERT_EQ(v, 0.0f);
}

TEST(Render, UnknownViewIsAnError) {
  CliFixture f("render_unknown");
  EXPECT_THROW(cmd_render(f.load(), f.dir / "run", {0, 99}), ConfigError);
  const fs::path cfg = f.write();
  EXPECT_EQ(run_tool("render --config " + cfg.string() + " --out " + (f.dir / "run").string() + " --views 99"), 2);
  EXPECT_EQ(run_tool("render --config " + cfg.string() + " --out " + (f.dir / "run").string() + " --views 1,3"), 0);
  EXPECT_TRUE(fs::exists(f.dir / "run" / "render" / "3.pfm"));
  EXPECT_FALSE(fs::exists(f.dir / "run" / "render" / "0.pfm"));
}

TEST(Render, RerunWritesIdenticalBytes) {
  CliFixture f("render_rerun");
  const RunConfig c = f.load();
  const auto a = slurp(cmd_render(c, f.dir / "a", {2}).at(0));
  const auto b = slurp(cmd_render(c, f.dir / "b", {2}).at(0));
  EXPECT_EQ(a, b);
}

// ---- localize ----------------------------------------------------------------

TEST(Localize, BlobFixtureLabelsExactlyTheBlob) {
  CliFixture f("loc_blob");
  const fs::path run = f.dir / "run";
  const LocalizationResult r = cmd_localize(f.load(), run);
  EXPECT_EQ(r.labeled_count, f.blob.blob.size());
  const GaussianScene labeled = load_scene((run / "scene_labeled.ply").string());
  ASSERT_EQ(labeled.size(), f.blob.scene.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const bool in_blob = std::find(f.blob.blob.begin(), f.blob.blob.end(), i) != f.blob.blob.end();
    EXPECT_EQ(labeled.gaussians[i].aux.label, in_blob) << "Gaussian " << i;
  }
  const json summary = json::parse(slurp(run / "localize_summary.json"));
  EXPECT_EQ(summary["labeled_count"], f.blob.blob.size());
  EXPECT_EQ(summary["mode"], "edit_existing");
  EXPECT_TRUE(summary.contains("started_at"));
  ASSERT_EQ(summary["views"].size(), static_cast<std::size_t>(f.blob.view_count()));
  for (const auto& v : summary["views"]) {
    EXPECT_TRUE(v["ok"].get<bool>());
    EXPECT_FALSE(v["positives"].empty());
    EXPECT_TRUE(fs::exists(view_keyword_path((run / "masks").string(), v["view"], "blob")));
  }
}

TEST(Localize, ZeroAttentionFails) {
  CliFixture f("loc_zero");
  for (int v = 0; v < f.blob.view_count(); ++v)
    write_pfm(ImageBuffer(64, 64, 1), view_keyword_path((f.dir / "attention").string(), v, "blob"));
  EXPECT_THROW(cmd_localize(f.load(), f.dir / "run"), DataError);
  EXPECT_EQ(run_tool("localize --config " + f.write().string() + " --out " + (f.dir / "run").string()), 3);
}

TEST(Localize, MissingAttentionFails) {
  CliFixture f("loc_missing");
  f.config["keyword"] = "teapot";
  EXPECT_THROW(cmd_localize(f.load(), f.dir / "run"), DataError);
}

TEST(Localize, ModeOverrideIsRecorded) {
  CliFixture f("loc_override");
  f.config["mode_override"] = "addition";
  const fs::path run = f.dir / "run";
  const LocalizationResult r = cmd_localize(f.load(), run);
  EXPECT_EQ(r.decision.mode, LocalizationMode::Addition);
  const json summary = json::parse(slurp(run / "localize_summary.json"));
  EXPECT_EQ(summary["mode"], "addition");
  EXPECT_TRUE(summary["mode_overridden"].get<bool>());
}

TEST(Localize, FlagsReachTheLocalizer) {
  CliFixture f("loc_flags");
  const fs::path run = f.dir / "run";
  // Only the peak pixel of each view survives a threshold of 1, too few to cluster.
  EXPECT_EQ(run_tool("localize --config " + f.write().string() + " --out " + run.string() + " --attn-threshold 1"),
            3);
  EXPECT_EQ(run_tool("localize --config " + f.write().string() + " --out " + run.string() + " --attn-threshold 1.5"),
            2);
  EXPECT_EQ(run_tool("localize --config " + f.write().string() + " --out " + run.string() + " --dbscan-minpts 3"), 0);
}

// ---- edit ------------------------------------------------------------------

TEST(Edit, ZeroIterationsReturnsTheInputScene) {
  CliFixture f("edit_zero");
  f.config["iterations"] = 0;
  const fs::path run = f.dir / "run";
  cmd_localize(f.load(), run);
  f.config["scene"] = "run/scene_labeled.ply";
  cmd_edit(f.load(), run, false);
  EXPECT_EQ(slurp(run / "scene_edited.ply"), slurp(run / "scene_labeled.ply"));
  EXPECT_TRUE(fs::exists(run / "losses.csv"));
  EXPECT_TRUE(fs::exists(run / "before" / "0.png"));
  EXPECT_TRUE(fs::exists(run / "after" / "0.pfm"));
}

TEST(Edit, UnlabeledSceneNeedsLocalization) {
  CliFixture f("edit_unlabeled");
  f.config["iterations"] = 0;
  EXPECT_THROW(cmd_edit(f.load(), f.dir / "run", false), DataError);
  cmd_edit(f.load(), f.dir / "run", true);
  EXPECT_TRUE(fs::exists(f.dir / "run" / "localize_summary.json"));
  EXPECT_EQ(load_scene((f.dir / "run" / "scene_edited.ply").string()).labeled_count(), f.blob.blob.size());
}

TEST(Edit, UsesTheLabeledSceneOfTheRunDirectory) {
  CliFixture f("edit_rundir");
  f.config["iterations"] = 0;
  cmd_localize(f.load(), f.dir / "run");
  const EditResult r = cmd_edit(f.load(), f.dir / "run", false);
  EXPECT_EQ(r.scene.labeled_count(), f.blob.blob.size());
}

TEST(Edit, WritesLossesAndCheckpoints) {
  CliFixture f("edit_ckpt");
  f.config["iterations"] = 6;
  f.config["checkpoint_interval"] = 3;
  f.config["anchor_interval"] = 3;
  const fs::path run = f.dir / "run";
  const EditResult r = cmd_edit(f.load(), run, true);
  ASSERT_EQ(r.losses.size(), 6u);

  std::ifstream csv(run / "losses.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header,
            "iteration,view,timestep,sds,l1,dssim,anchor_position,anchor_log_scale,anchor_rotation,anchor_opacity,"
            "anchor_color,total");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 6);

  for (const char* stem : {"iter_000003", "iter_000006"}) {
    EXPECT_TRUE(fs::exists(run / "checkpoints" / (std::string(stem) + ".ply")));
    const json side = json::parse(slurp(run / "checkpoints" / (std::string(stem) + ".json")));
    EXPECT_FALSE(side["rng_state"].get<std::string>().empty());
    for (const auto& a : side["anchors"]) EXPECT_TRUE(fs::exists(run / "checkpoints" / a.get<std::string>()));
  }
  const json side = json::parse(slurp(run / "checkpoints" / "iter_000006.json"));
  EXPECT_EQ(side["iteration"], 6);
  EXPECT_EQ(side["anchors"].size(), 3u);
}

TEST(Edit, RerunIsByteIdentical) {
  CliFixture f("edit_rerun");
  f.config["iterations"] = 20;
  cmd_edit(f.load(), f.dir / "a", true);
  cmd_edit(f.load(), f.dir / "b", true);
  for (const char* file : {"scene_edited.ply", "losses.csv", "after/3.pfm", "localize_summary.json"}) {
    if (std::string(file) == "localize_summary.json") {
      json a = json::parse(slurp(f.dir / "a" / file)), b = json::parse(slurp(f.dir / "b" / file));
      a.erase("started_at");
      b.erase("started_at");
      EXPECT_EQ(a, b);
    } else {
      EXPECT_EQ(slurp(f.dir / "a" / file), slurp(f.dir / "b" / file)) << file;
    }
  }
}

TEST(Edit, UnreachableWireProviderIsATransportError) {
  CliFixture f("edit_wire");
  f.config["iterations"] = 5;
  f.config["provider"] = "wire:127.0.0.1:1";
  f.config["provider_timeout_ms"] = 200;
  f.config["mode_override"] = "addition";
  EXPECT_EQ(run_tool("edit --auto-localize --config " + f.write().string() + " --out " + (f.dir / "run").string()),
            5);
}

TEST(Edit, NumericAbortLeavesADump) {
  CliFixture f("edit_nan");
  f.config["iterations"] = 5;
  f.config["oracle_strength"] = 1e300;
  const fs::path run = f.dir / "run";
  EXPECT_EQ(run_tool("edit --auto-localize --config " + f.write().string() + " --out " + run.string()), 4);
  EXPECT_TRUE(fs::exists(run / "abort" / "scene.ply"));
  EXPECT_TRUE(fs::exists(run / "abort" / "state.json"));
}

TEST(Edit, OracleNeedsTargets) {
  CliFixture f("edit_targets");
  f.config["iterations"] = 5;
  f.config.erase("targets_dir");
  EXPECT_THROW(cmd_edit(f.load(), f.dir / "run", true), ConfigError);
}

// ---- eval ------------------------------------------------------------------

namespace {

struct EvalFixture {
  fs::path dir;
  json config;
  std::vector<ImageBuffer> before;

  explicit EvalFixture(const std::string& name) {
    dir = scratch(name);
    save_scene(GaussianScene{}, (dir / "scene.ply").string());
    std::vector<Camera> cams(2, look_at({0, 0, -3}, {0, 0, 0}, {0, -1, 0}, 24, 20, 30.0));
    save_cameras(cams, (dir / "cameras.json").string());
    fs::create_directories(dir / "before");
    fs::create_directories(dir / "masks");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0.1f, 0.8f);
    for (int v = 0; v < 2; ++v) {
      ImageBuffer img(24, 20, 3);
      for (float& x : img.data) x = u(rng);
      write_pfm(img, (dir / "before" / (std::to_string(v) + ".pfm")).string());
      before.push_back(img);
      ImageBuffer m(24, 20, 1);
      for (int y = 5; y < 12; ++y)
        for (int x = 8; x < 16; ++x) m.at(x, y) = 1.0f;
      write_pfm(m, view_keyword_path((dir / "masks").string(), v, "cup"));
    }
    config = {{"scene", "scene.ply"}, {"cameras", "cameras.json"}, {"static_masks_dir", "masks"}, {"keyword", "cup"}};
  }
  RunConfig load() const {
    write_config(config, dir / "config.json");
    return load_run_config((dir / "config.json").string());
  }
  void write_after(const std::vector<ImageBuffer>& imgs) const {
    fs::create_directories(dir / "after");
    for (std::size_t v = 0; v < imgs.size(); ++v)
      write_pfm(imgs[v], (dir / "after" / (std::to_string(v) + ".pfm")).string());
  }
};

}  // namespace

TEST(Eval, IdenticalImagesReportInfinitePsnr) {
  EvalFixture f("eval_same");
  f.write_after(f.before);
  const json m = cmd_eval(f.load(), f.dir / "run", f.dir / "before", f.dir / "after");
  EXPECT_EQ(m["outside_psnr"], "inf");
  EXPECT_DOUBLE_EQ(m["outside_ssim"].get<double>(), 1.0);
  EXPECT_TRUE(m["inside_l1_to_target"].is_null());
  EXPECT_EQ(m["per_view"].size(), 2u);
  EXPECT_TRUE(fs::exists(f.dir / "run" / "eval.json"));
}

TEST(Eval, ConstantOffsetOutsideGivesTwentyDecibels) {
  EvalFixture f("eval_offset");
  std::vector<ImageBuffer> after = f.before;
  const ImageBuffer mask = read_pfm(view_keyword_path((f.dir / "masks").string(), 0, "cup"));
  for (auto& img : after)
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      if (mask.data[p] == 0.0f)
        for (int c = 0; c < 3; ++c) img.data[p * 3 + c] += 0.1f;
  f.write_after(after);
  const json m = cmd_eval(f.load(), f.dir / "run", f.dir / "before", f.dir / "after");
  // MSE = 0.01 -> 10 log10(1 / 0.01); float rounding of the offset leaves ~1e-6 dB.
  EXPECT_NEAR(m["outside_psnr"].get<double>(), 20.0, 1e-4);
  for (const auto& v : m["per_view"]) EXPECT_NEAR(v["outside_psnr"].get<double>(), 20.0, 1e-4);
}

TEST(Eval, InsideErrorAgainstTargets) {
  EvalFixture f("eval_target");
  fs::create_directories(f.dir / "targets");
  std::vector<ImageBuffer> after = f.before;
  for (std::size_t v = 0; v < 2; ++v) {
    ImageBuffer target = f.before[v];
    for (float& x : target.data) x += 0.25f;
    write_pfm(target, (f.dir / "targets" / (std::to_string(v) + ".pfm")).string());
  }
  f.write_after(after);
  f.config["targets_dir"] = "targets";
  const json m = cmd_eval(f.load(), f.dir / "run", f.dir / "before", f.dir / "after");
  EXPECT_NEAR(m["inside_l1_to_target"].get<double>(), 0.25, 1e-6);
  EXPECT_EQ(m["per_view"][0]["inside_pixels"], 56);
}

TEST(Eval, EmptyMaskCoversTheWholeImage) {
  EvalFixture f("eval_empty");
  for (int v = 0; v < 2; ++v) write_pfm(ImageBuffer(24, 20, 1), view_keyword_path((f.dir / "masks").string(), v, "cup"));
  std::vector<ImageBuffer> after = f.before;
  after[0].data[0] += 0.5f;  // a pixel that the old mask did not cover either
  after[1].at(10, 8, 1) += 0.5f;  // inside the old mask
  fs::create_directories(f.dir / "targets");
  for (int v = 0; v < 2; ++v) write_pfm(f.before[v], (f.dir / "targets" / (std::to_string(v) + ".pfm")).string());
  f.config["targets_dir"] = "targets";
  f.write_after(after);
  const json m = cmd_eval(f.load(), f.dir / "run", f.dir / "before", f.dir / "after");
  EXPECT_TRUE(m["inside_l1_to_target"].is_null());
  const double mse = 2 * 0.25 / (2.0 * 24 * 20 * 3);
  EXPECT_NEAR(m["outside_psnr"].get<double>(), 10.0 * std::log10(1.0 / mse), 1e-4);
}

TEST(Eval, CountMismatchIsAnError) {
  EvalFixture f("eval_mismatch");
  f.write_after({f.before[0]});
  EXPECT_THROW(cmd_eval(f.load(), f.dir / "run", f.dir / "before", f.dir / "after"), DataError);
  write_config(f.config, f.dir / "config.json");
  EXPECT_EQ(run_tool("eval --config " + (f.dir / "config.json").string() + " --out " + (f.dir / "run").string() +
                     " --before " + (f.dir / "before").string() + " --after " + (f.dir / "after").string()),
            3);
}

// ---- exit codes ------------------------------------------------------------

TEST(ExitCodes, ConfigProblems) {
  const fs::path dir = scratch("exit_config");
  EXPECT_EQ(run_tool("render"), 2);
  EXPECT_EQ(run_tool("frobnicate --config x.json"), 2);
  EXPECT_EQ(run_tool("render --config " + (dir / "absent.json").string()), 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run_tool("render --config " + (dir / "bad.json").string()), 2);
  write_config({{"scene", "missing.ply"}, {"cameras", "missing.json"}}, dir / "paths.json");
  EXPECT_EQ(run_tool("render --config " + (dir / "paths.json").string()), 2);
}

TEST(ExitCodes, MalformedSceneIsADataError) {
  const fs::path dir = scratch("exit_data");
  std::ofstream(dir / "scene.ply") << "ply\nformat ascii 1.0\nend_header\n";
  save_cameras({look_at({0, 0, -3}, {0, 0, 0}, {0, -1, 0}, 8, 8, 10.0)}, (dir / "cameras.json").string());
  write_config({{"scene", "scene.ply"}, {"cameras", "cameras.json"}}, dir / "config.json");
  EXPECT_EQ(run_tool("render --config " + (dir / "config.json").string() + " --out " + (dir / "run").string()), 3);
}

TEST(ExitCodes, RunDirectoryIsNamedByConfigHash) {
  CliFixture f("exit_hash");
  f.config["output_dir"] = "runs";
  const fs::path cfg = f.write();
  ASSERT_EQ(run_tool("render --views 0 --config " + cfg.string()), 0);
  const RunConfig c = load_run_config(cfg.string());
  EXPECT_TRUE(fs::exists(f.dir / "runs" / c.hash / "render" / "0.pfm"));
  ASSERT_EQ(run_tool("render --views 0 --seed 9 --config " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(f.dir / "runs" / load_run_config(cfg.string(), {{"seed", 9}}).hash / "render" / "0.pfm"));
}
