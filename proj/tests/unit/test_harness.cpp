#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "apc/common/errors.hpp"
#include "apc/harness/checkpoint.hpp"
#include "apc/harness/cli.hpp"
#include "apc/harness/config.hpp"
#include "apc/harness/experiments.hpp"
#include "apc/harness/output.hpp"
#include "apc/options/options.hpp"

using namespace apc;
using namespace apc::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "apc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("apc_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

Checkpoint small_checkpoint(std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint ck;
  ck.seed = seed;
  ck.config_hash = 0x1234;
  ck.config_text = "seed=" + std::to_string(seed) + "\n";
  ck.layout = checkerboard_layout(2, 2);
  const nn::NetworkSpec policy{{9, 5, 4}, {nn::Activation::kRelu, nn::Activation::kLinear}, std::nullopt};
  ck.hnet = hyper::init_hypernet(rng, policy, {16, 6});
  for (int k = 0; k < hyper::kNumOptions; ++k) ck.baselines.push_back(nn::init_params(options::baseline_spec(9, 3), rng));
  const nn::NetworkSpec fs_spec{{43, 6, 5, 27}, {nn::Activation::kRelu, nn::Activation::kTanh, nn::Activation::kLinear}, 1};
  ck.world_model = wm::init_world_model(rng, fs_spec);
  return ck;
}

}  // namespace

TEST_CASE("key-value parsing skips comments and reports line numbers") {
  std::istringstream in("# comment\n\n seed = 7 \nsampling=uniform\n");
  const auto kv = parse_key_values(in, "x.conf");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"seed", "7"});
  CHECK(kv[1].second == "uniform");

  std::istringstream bad("seed = 1\nno equals sign\n");
  try {
    parse_key_values(bad, "x.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("x.conf:2:", 0) == 0);
  }
}

TEST_CASE("settings are validated") {
  ExperimentConfig c;
  apply_setting(c, "hypernet_layers", "16, 32");
  CHECK(c.hypernet_layers == std::vector<int>{16, 32});
  apply_setting(c, "sampling", "uniform");
  CHECK(c.planner.sampling == plan::Sampling::kUniform);
  apply_setting(c, "snap", "false");
  CHECK_FALSE(c.planner.snap);
  CHECK_THROWS_AS(apply_setting(c, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "seed", "-3"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "gamma", "0.9x"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "sampling", "greedy"), ConfigError);

  ExperimentConfig d;
  d.policy_layers = {64, 3};
  CHECK_THROWS_AS(d.finalize(), ConfigError);
  ExperimentConfig e;
  e.hypernet_layers = {8, 128};
  CHECK_THROWS_AS(e.finalize(), ConfigError);
  ExperimentConfig f;
  f.fs_layers = {128};
  CHECK_THROWS_AS(f.finalize(), ConfigError);
}

TEST_CASE("layer lists become module specs") {
  auto c = load_config(APC_SOURCE_DIR "/configs/reference.conf");
  c.finalize();
  CHECK(c.options.policy.widths == std::vector<int>{9, 64, 64, 4});
  CHECK(c.options.hypernet_trunk == std::vector<int>{16, 128, 128});
  CHECK(c.fs_spec() == wm::default_fs_spec());
  CHECK(c.flat.policy == plan::default_flat_spec());
  CHECK(c.flat.lr_agent == c.options.lr_agent);
  CHECK(c.planner.seed == c.seed);
}

TEST_CASE("config hash covers results but not output locations") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  ExperimentConfig a, b;
  b.output_dir = "elsewhere";
  b.threads = 4;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 9;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(canonical_text(a).find("seed=0\n") != std::string::npos);
}

TEST_CASE("CRC-32 matches the standard check value") { CHECK(crc32_of("123456789") == 0xCBF43926u); }

TEST_CASE("checkpoint round trip reproduces forward outputs bitwise") {
  const auto ck = small_checkpoint(3);
  const auto back = decode_checkpoint(encode_checkpoint(ck));
  CHECK(back.seed == ck.seed);
  CHECK(back.config_text == ck.config_text);
  CHECK(back.layout == ck.layout);
  const auto e = hyper::OptionEmbedding::canonical(5).values;
  const auto x = hyper::local_onehot({1, 2});
  CHECK(hyper::policy_logits(hyper::generate_policy_params(back.hnet, e), x) ==
        hyper::policy_logits(hyper::generate_policy_params(ck.hnet, e), x));
  for (int k = 0; k < hyper::kNumOptions; ++k) CHECK(back.baselines[k].values() == ck.baselines[k].values());
  const auto s = wm::encode_room(ck.layout, {1, 0});
  const auto a = wm::fs_step(*ck.world_model, s, e, ck.world_model->zero_hidden());
  const auto b = wm::fs_step(*back.world_model, s, e, back.world_model->zero_hidden());
  CHECK(a.state == b.state);
  CHECK(encode_checkpoint(back) == encode_checkpoint(ck));
}

TEST_CASE("damaged checkpoints are rejected") {
  const std::string bytes = encode_checkpoint(small_checkpoint(4));
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{20}})
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), FormatError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  try {
    decode_checkpoint(flipped);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
  std::string newer = bytes;
  newer[4] = 2;
  try {
    decode_checkpoint(newer);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version 2") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_checkpoint("APCX" + bytes.substr(4)), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ck.apck"), ConfigError);
}

TEST_CASE("greedy option behaviour does not depend on the evaluation seed") {
  const auto ck = decode_checkpoint(encode_checkpoint(small_checkpoint(5)));
  const auto thetas = options::generate_all(ck.hnet);
  for (int k = 0; k < hyper::kNumOptions; ++k) {
    const auto a = options::evaluate_option(ck.layout, thetas[k], k, 20);
    const auto b = options::evaluate_option(ck.layout, thetas[k], k, 20);
    CHECK(a.success_rate == b.success_rate);
    CHECK(a.mean_steps == b.mean_steps);
  }
}

TEST_CASE("moving average and CSV quoting") {
  const std::vector<double> v = {1, 2, 3, 4, 5, 6};
  const auto m = moving_average(v, 3);
  const std::vector<double> want = {1, 1.5, 2, 3, 4, 5};
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(m[i] == doctest::Approx(want[i]).epsilon(1e-15));
  const auto r = moving_average(v, 3, {false, false, false, true, false, false});
  CHECK(r[3] == 4.0);
  CHECK(r[4] == doctest::Approx(4.5));
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("svg embeds provenance and one polyline per series") {
  PlotSpec p{"t", "x", "y", {{"a", {0, 1}, {0, 1}, {}, "#000"}, {"b", {0, 1}, {1, 0}, {0.1, 0.1}, "#f00"}}, {0.5}};
  const auto svg = render_svg(p, "seed=1 & more");
  CHECK(svg.find("<!-- seed=1 &amp; more -->") != std::string::npos);
  std::size_t n = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++n;
  CHECK(n == 2);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}

TEST_CASE("CLI exit codes") {
  const auto out = scratch("cli");
  CHECK(cli({"gradcheck", "--out", out.string(), "--seed", "3"}) == kExitOk);
  const auto csv = slurp(out / "gradcheck.csv");
  CHECK(csv.rfind("# apc version=1.0.0 seed=3 config_hash=0x", 0) == 0);
  CHECK(cli({"gradcheck", "--out", out.string(), "--seed", "3"}) == kExitOk);
  CHECK(slurp(out / "gradcheck.csv") == csv);
  CHECK(cli({"gradcheck", "--out", out.string(), "--set", "bogus=1"}) == kExitConfig);
  CHECK(cli({"gradcheck", "--out", out.string(), "--set", "novalue"}) == kExitConfig);
  CHECK(cli({"gradcheck", "--out", out.string(), "--threads", "0"}) == kExitConfig);
  CHECK(cli({"gradcheck", "--set", "gradcheck_tolerance=1e-30", "--out", out.string()}) == kExitFailed);
  CHECK(cli({"goal-change", "--out", (out / "empty").string()}) == kExitConfig);
  CHECK(cli({"frobnicate"}) == kExitConfig);
  fs::remove_all(out);
}

TEST_CASE("identity transfer reproduces results for the same building") {
  const auto out = scratch("transfer");
  const std::string base = APC_SOURCE_DIR "/configs/layouts/checkerboard4.txt";
  const std::vector<std::string> tiny = {"--set", "episodes_per_option=10", "--set", "wm_episodes=4", "--set", "wm_epochs=1",
                                         "--set", "wm_heldout_episodes=2", "--set", "num_trajectories=8", "--set",
                                         "transfer_goals=2", "--set", "max_options=3"};
  auto args = std::vector<std::string>{"train-options", "--out", out.string()};
  args.insert(args.end(), tiny.begin(), tiny.end());
  CHECK(cli(args) != kExitConfig);
  args[0] = "transfer";
  args.insert(args.end(), {"--set", "transfer_layouts=" + base + "," + base});
  CHECK(cli(args) != kExitConfig);

  std::istringstream in(slurp(out / "transfer.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (line.rfind(base, 0) == 0) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == rows[2]);
  CHECK(rows[1] == rows[3]);
  // options on the same building keep exactly the base success rates
  const auto opts = slurp(out / "transfer_summary.csv");
  CHECK(opts.find(base + ",4,4,") != std::string::npos);
  fs::remove_all(out);
}
