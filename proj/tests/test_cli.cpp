#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsx/checkpoint.hpp"
#include "dsx/corpus.hpp"
#include "dsx/mixgen.hpp"
#include "dsx/net.hpp"

using namespace dsx;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef DSX_CLI_PATH
#error "DSX_CLI_PATH must point at the dsx binary"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DSX_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path work_dir() {
  const auto p = fs::temp_directory_path() / "dsx_cli_test";
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  f << j.dump(2);
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  return json::parse(f);
}

}  // namespace

TEST_CASE("gen-data produces the 41-record manifest and run metadata") {
  const auto tmp = work_dir();
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  synth_corpus_dir((tmp / "corpus").string(), 6, 1.6, 12);

  write_json(tmp / "gen.json",
             json{{"seed", 9},
                  {"corpus_dir", (tmp / "corpus").string()},
                  {"min_clip_s", 1.5},
                  {"rooms", json::array({json{{"dims", {5.0, 4.0, 2.8}},
                                              {"absorption", 0.5},
                                              {"max_order", 2}}})},
                  {"gen", json{{"n_sectors", 6},
                               {"max_targets", 3},
                               {"clips_per_combo", 1},
                               {"duration_s", 1.0},
                               {"noise_head_s", 0.2}}},
                  {"bank", "flat"}});
  REQUIRE(run_cli("gen-data " + (tmp / "gen.json").string() + " --out " +
                  (tmp / "data").string()) == 0);

  const auto manifest = load_manifest((tmp / "data" / "manifest.jsonl").string());
  CHECK(manifest.records.size() == 41);
  CHECK(manifest.prng_algorithm == "xoshiro256**");

  const json meta = read_json(tmp / "data" / "run_meta.json");
  CHECK(meta.at("command") == "gen-data");
  CHECK(meta.at("seed") == 9);
  CHECK(meta.at("prng_algorithm") == "xoshiro256**");
  CHECK(meta.at("config_sha256").get<std::string>().size() == 64);
  CHECK(meta.contains("artifact_version"));

  SUBCASE("fit-stats runs over the generated manifest") {
    write_json(tmp / "stats.json",
               json{{"seed", 1},
                    {"manifest", (tmp / "data" / "manifest.jsonl").string()}});
    REQUIRE(run_cli("fit-stats " + (tmp / "stats.json").string() + " --out " +
                    (tmp / "stats_out").string()) == 0);
    std::ifstream csv(tmp / "stats_out" / "norm_stats.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "bin,feature,mean,var");
  }

  SUBCASE("infer and stream run against a saved checkpoint") {
    NetConfig cfg;
    cfg.embed_channels = 10;
    cfg.blstm_hidden = 5;
    cfg.causal_lstm_hidden = 4;
    const Model model = Model::init(cfg, NormStats::neutral(cfg.bins()), 3);
    save_checkpoint(model, TrainMeta{}, (tmp / "ckpt.ssdx").string());

    // 5 s stereo input at 24 kHz: exactly 625 chunks of 192 samples.
    AudioBuffer mix(2, 5 * kSampleRate);
    Rng rng(4);
    for (int c = 0; c < 2; ++c)
      for (auto& v : mix[c]) v = rng.uniform(-0.4, 0.4);
    wav_write(mix, (tmp / "input.wav").string());

    write_json(tmp / "infer.json", json{{"seed", 2},
                                        {"checkpoint", (tmp / "ckpt.ssdx").string()},
                                        {"input_wav", (tmp / "input.wav").string()},
                                        {"sectors", {1}}});
    REQUIRE(run_cli("infer " + (tmp / "infer.json").string() + " --out " +
                    (tmp / "infer_out").string()) == 0);
    const AudioBuffer out = wav_read((tmp / "infer_out" / "extracted.wav").string());
    CHECK(out.length() == mix.length());

    REQUIRE(run_cli("stream " + (tmp / "infer.json").string() + " --out " +
                    (tmp / "stream_out").string()) == 0);
    const json timing = read_json(tmp / "stream_out" / "stream_timing.json");
    CHECK(timing.at("chunks") == 625);
    CHECK(timing.at("mean_ms_per_chunk").get<double>() > 0.0);
  }
}

TEST_CASE("invalid config exits with code 2 and a field path") {
  const auto tmp = work_dir() / "bad";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_json(tmp / "bad.json", json{{"seed", 1}});  // missing rooms/corpus
  CHECK(run_cli("gen-data " + (tmp / "bad.json").string() + " --out " +
                (tmp / "out").string()) == 2);
  CHECK(run_cli("gen-data " + (tmp / "missing.json").string()) == 2);
  // Not valid JSON at all.
  std::ofstream f(tmp / "broken.json");
  f << "{ nope";
  f.close();
  CHECK(run_cli("design " + (tmp / "broken.json").string()) == 2);
}

TEST_CASE("design CLI ranks and writes the sweep table") {
  const auto tmp = work_dir() / "design";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_json(tmp / "design.json",
             json{{"seed", 3},
                  {"specs", json::array(
                                {json{{"name", "default6"}, {"spec", "default6"}},
                                 json{{"name", "small"}, {"spec", "scaled10mm"}},
                                 json{{"name", "flat"}, {"spec", "flat"}}})}});
  REQUIRE(run_cli("design " + (tmp / "design.json").string() + " --out " +
                  (tmp / "out").string()) == 0);
  std::ifstream csv(tmp / "out" / "design_sweep.csv");
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  CHECK(line.find("default6") != std::string::npos);
}
