// Command-line surface for the directional speech extraction laboratory.
//
// Every subcommand takes a JSON config plus a few overriding flags and
// writes its outputs (and a run-metadata JSON) under --out.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsx/beamform.hpp"
#include "dsx/checkpoint.hpp"
#include "dsx/corpus.hpp"
#include "dsx/eval.hpp"
#include "dsx/microstructure.hpp"
#include "dsx/mixgen.hpp"
#include "dsx/net.hpp"
#include "dsx/scene.hpp"
#include "dsx/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsx;

namespace {

constexpr const char* kArtifactVersion = "0.1.0";

// --- minimal SHA-256 (FIPS 180-4), enough to fingerprint config files ------
struct Sha256 {
  uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
  std::vector<uint8_t> buf;

  static uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void process(const uint8_t* p) {
    static const uint32_t k[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
        0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
        0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
        0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
        0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
        0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
        0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
    uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (p[4 * i] << 24) | (p[4 * i + 1] << 16) | (p[4 * i + 2] << 8) |
             p[4 * i + 3];
    for (int i = 16; i < 64; ++i) {
      const uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
             g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const uint32_t ch = (e & f) ^ (~e & g);
      const uint32_t t1 = hh + s1 + ch + k[i] + w[i];
      const uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const uint32_t t2 = s0 + maj;
      hh = g; g = f; f = e; e = d + t1; d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }

  std::string digest(const std::string& data) {
    std::vector<uint8_t> m(data.begin(), data.end());
    const uint64_t bits = static_cast<uint64_t>(m.size()) * 8;
    m.push_back(0x80);
    while (m.size() % 64 != 56) m.push_back(0);
    for (int i = 7; i >= 0; --i) m.push_back((bits >> (8 * i)) & 0xff);
    for (size_t off = 0; off < m.size(); off += 64) process(m.data() + off);
    char out[65];
    for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
    return std::string(out, 64);
  }
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  int64_t seed = -1;       // -1: use the config's seed
  int n_sectors = 0;       // 0: use the config's value
};

json load_config(const CommonArgs& args) {
  std::ifstream f(args.config_path);
  if (!f) {
    std::cerr << "config not found: " << args.config_path << "\n";
    std::exit(2);
  }
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) {
    std::cerr << "config is not valid JSON: " << args.config_path << "\n";
    std::exit(2);
  }
  return j;
}

[[noreturn]] void usage_error(const std::string& field, const std::string& why) {
  std::cerr << "config error at " << field << ": " << why << "\n";
  std::exit(2);
}

uint64_t effective_seed(const CommonArgs& args, const json& cfg) {
  if (args.seed >= 0) return static_cast<uint64_t>(args.seed);
  return cfg.value("seed", 0ULL);
}

void write_run_meta(const CommonArgs& args, const std::string& command,
                    uint64_t seed) {
  std::ifstream f(args.config_path, std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Sha256 sha;
  json meta = {{"command", command},
               {"config_sha256", sha.digest(raw)},
               {"seed", seed},
               {"prng_algorithm", kPrngAlgorithm},
               {"artifact_version", kArtifactVersion}};
  std::ofstream out(fs::path(args.out_dir) / "run_meta.json", std::ios::trunc);
  out << meta.dump(2) << '\n';
}

MicrostructureSpec spec_from_json(const json& j, const std::string& field) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "default6") return MicrostructureSpec::default_six_hole();
    if (name == "flat") return MicrostructureSpec::flat();
    if (name == "scaled10mm")
      return MicrostructureSpec::scaled(MicrostructureSpec::default_six_hole(), 0.5);
    usage_error(field, "unknown preset (default6 | flat | scaled10mm)");
  }
  if (!j.is_object()) usage_error(field, "expected preset string or spec object");
  MicrostructureSpec s;
  s.diameter_m = j.value("diameter_m", 0.020);
  s.wall_leakage_db = j.value("wall_leakage_db", -33.0);
  s.directivity_exponent = j.value("directivity_exponent", 2.0);
  for (const auto& h : j.value("holes", json::array())) {
    HoleSpec hs;
    hs.azimuth_deg = h.at("azimuth_deg").get<double>();
    hs.tube_length_m = h.at("tube_length_m").get<double>();
    if (h.contains("resonator") && !h["resonator"].is_null()) {
      const auto& r = h["resonator"];
      hs.resonator = ResonatorSpec{r.at("f0_hz").get<double>(),
                                   r.at("q").get<double>(),
                                   r.at("gain_db").get<double>()};
    }
    s.holes.push_back(hs);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    usage_error(field, e.what());
  }
  return s;
}

std::vector<RoomSpec> rooms_from_json(const json& cfg) {
  std::vector<RoomSpec> rooms;
  if (!cfg.contains("rooms") || !cfg["rooms"].is_array() || cfg["rooms"].empty())
    usage_error("rooms", "expected a non-empty array");
  for (const auto& r : cfg["rooms"]) {
    RoomSpec room;
    const auto dims = r.at("dims").get<std::vector<double>>();
    if (dims.size() != 3) usage_error("rooms[].dims", "expected [Lx, Ly, Lz]");
    room.dims = {dims[0], dims[1], dims[2]};
    room.absorption = r.value("absorption", 0.4);
    room.max_order = r.value("max_order", 3);
    try {
      room.validate();
    } catch (const Error& e) {
      usage_error("rooms[]", e.what());
    }
    rooms.push_back(room);
  }
  return rooms;
}

GenConfig gen_config_from_json(const json& g, int n_sectors_override) {
  GenConfig c;
  c.n_sectors = g.value("n_sectors", 6);
  if (n_sectors_override) c.n_sectors = n_sectors_override;
  c.max_targets = g.value("max_targets", 3);
  c.clips_per_combo = g.value("clips_per_combo", 1);
  c.clips_per_combo_by_k = g.value("clips_per_combo_by_k", std::vector<int>{});
  c.snr_lo_db = g.value("snr_lo_db", -5.0);
  c.snr_hi_db = g.value("snr_hi_db", 5.0);
  c.duration_s = g.value("duration_s", 3.0);
  c.noise_head_s = g.value("noise_head_s", 0.5);
  c.dist_lo_m = g.value("dist_lo_m", 0.5);
  c.dist_hi_m = g.value("dist_hi_m", 2.5);
  c.empty_target_rate = g.value("empty_target_rate", 0.0);
  c.interferers_lo = g.value("interferers_lo", 1);
  c.interferers_hi = g.value("interferers_hi", 2);
  c.render_array = g.value("render_array", false);
  c.array_mics = g.value("array_mics", 4);
  c.array_radius_m = g.value("array_radius_m", 0.05);
  c.rigs_per_room = g.value("rigs_per_room", 1);
  c.mic_separation_m = g.value("mic_separation_m", 0.01);
  return c;
}

NetConfig net_config_from_json(const json& n, int n_sectors_override) {
  NetConfig c;
  c.n_sectors = n.value("n_sectors", 6);
  if (n_sectors_override) c.n_sectors = n_sectors_override;
  c.embed_channels = n.value("embed_channels", 16);
  c.n_blocks = n.value("n_blocks", 2);
  c.freq_downsample = n.value("freq_downsample", 4);
  c.blstm_hidden = n.value("blstm_hidden", 32);
  c.causal_lstm_hidden = n.value("causal_lstm_hidden", 32);
  try {
    c.validate();
  } catch (const Error& e) {
    usage_error("net", e.what());
  }
  return c;
}

AngleQuery query_from_json(const json& cfg, int n_sectors) {
  AngleQuery q;
  q.n_sectors = n_sectors;
  if (!cfg.contains("sectors") || !cfg["sectors"].is_array() ||
      cfg["sectors"].empty())
    usage_error("sectors", "expected a non-empty array of sector indices");
  for (const auto& s : cfg["sectors"]) {
    const int idx = s.get<int>();
    if (idx < 1 || idx > n_sectors) usage_error("sectors[]", "index out of range");
    q.selected |= 1u << (idx - 1);
  }
  return q;
}

// --- subcommands ------------------------------------------------------------

int cmd_design(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  std::vector<std::pair<std::string, MicrostructureSpec>> specs;
  if (!cfg.contains("specs") || cfg["specs"].size() < 2)
    usage_error("specs", "need at least two designs to sweep");
  for (const auto& s : cfg["specs"]) {
    const std::string name = s.at("name").get<std::string>();
    specs.emplace_back(name, spec_from_json(s.at("spec"), "specs[].spec"));
  }
  const double f_lo = cfg.value("f_lo_hz", 1000.0);
  const double f_hi = cfg.value("f_hi_hz", 4000.0);
  const auto summaries = design_sweep(specs, f_lo, f_hi);

  fs::create_directories(args.out_dir);
  std::ofstream csv(fs::path(args.out_dir) / "design_sweep.csv");
  csv << "rank,name,mean_diversity,mean_pairwise_distance\n";
  for (size_t i = 0; i < summaries.size(); ++i)
    csv << i + 1 << ',' << summaries[i].name << ',' << summaries[i].mean_diversity
        << ',' << summaries[i].mean_pairwise_distance << '\n';
  write_run_meta(args, "design", seed);
  std::cout << "design sweep: best = " << summaries.front().name << "\n";
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto rooms = rooms_from_json(cfg);
  const auto bank_spec = spec_from_json(cfg.value("bank", json("default6")), "bank");
  const auto bank = realize_bank(bank_spec, default_angle_grid());

  SceneSpec scene;
  scene.room = rooms[0];
  scene.seed = seed;
  const auto rig = cfg.at("rig");
  const auto ref = rig.at("ref_mic_pos").get<std::vector<double>>();
  const auto st = rig.at("struct_mic_pos").get<std::vector<double>>();
  scene.rig.ref_mic_pos = {ref[0], ref[1], ref[2]};
  scene.rig.struct_mic_pos = {st[0], st[1], st[2]};
  scene.rig.orientation_deg = rig.value("orientation_deg", 0.0);

  std::map<std::string, std::vector<double>> signals;
  size_t max_len = 0;
  for (const auto& s : cfg.at("sources")) {
    const std::string wav = s.at("wav").get<std::string>();
    const auto pos = s.at("position").get<std::vector<double>>();
    AudioBuffer b = wav_read(wav);
    signals[wav] = b[0];
    max_len = std::max(max_len, b.length());
    scene.sources.push_back({wav, {pos[0], pos[1], pos[2]}, SourceRole::Target});
  }
  const auto rendered = render_scene(scene, signals, bank, max_len);

  fs::create_directories(args.out_dir);
  AudioBuffer mix(2, max_len);
  mix.data[0] = rendered.ref_channel;
  mix.data[1] = rendered.struct_channel;
  wav_write(mix, (fs::path(args.out_dir) / "scene_mix.wav").string());
  write_run_meta(args, "simulate", seed);
  std::cout << "rendered scene with " << scene.sources.size() << " sources\n";
  return 0;
}

int cmd_gen_data(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto rooms = rooms_from_json(cfg);
  const GenConfig gen =
      gen_config_from_json(cfg.value("gen", json::object()), args.n_sectors);
  const auto bank_spec = spec_from_json(cfg.value("bank", json("default6")), "bank");
  const auto bank = realize_bank(bank_spec, default_angle_grid());
  const std::string corpus_dir = cfg.at("corpus_dir").get<std::string>();
  const auto corpus = scan_corpus(corpus_dir, cfg.value("min_clip_s", 3.0));

  fs::create_directories(args.out_dir);
  const auto manifest = generate_mixtures(corpus, rooms, gen, bank, args.out_dir, seed);
  save_manifest(manifest, (fs::path(args.out_dir) / "manifest.jsonl").string());
  write_run_meta(args, "gen-data", seed);
  std::cout << "generated " << manifest.records.size() << " mixtures\n";
  return 0;
}

int cmd_fit_stats(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto manifest = load_manifest(cfg.at("manifest").get<std::string>());
  std::vector<std::string> paths;
  for (const auto& r : manifest.records)
    paths.push_back(resolve_path(manifest, r.mixture_wav_path));
  const auto stats = fit_norm_stats(paths, FrameSpec::hann(),
                                    cfg.value("max_records", 1 << 30));
  fs::create_directories(args.out_dir);
  norm_stats_to_csv(stats, (fs::path(args.out_dir) / "norm_stats.csv").string());
  write_run_meta(args, "fit-stats", seed);
  std::cout << "fitted stats over " << paths.size() << " records\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto manifest = load_manifest(cfg.at("manifest").get<std::string>());

  TrainConfig tc;
  tc.net = net_config_from_json(cfg.value("net", json::object()), args.n_sectors);
  const json t = cfg.value("train", json::object());
  tc.epochs = t.value("epochs", 40);
  tc.batch_size = t.value("batch_size", 4);
  tc.lambda = t.value("lambda", 50.0);

  std::vector<std::string> paths;
  for (const auto& r : manifest.records)
    paths.push_back(resolve_path(manifest, r.mixture_wav_path));
  const auto stats =
      fit_norm_stats(paths, tc.net.frame(), t.value("stats_max_records", 1 << 30));

  TrainMeta meta;
  const Model model = train(manifest, stats, tc, seed, &meta);
  fs::create_directories(args.out_dir);
  save_checkpoint(model, meta,
                  (fs::path(args.out_dir) / "checkpoint.ssdx").string());
  write_run_meta(args, "train", seed);
  std::cout << "trained " << tc.epochs << " epochs, final loss " << meta.final_loss
            << "\n";
  return 0;
}

int cmd_infer(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto loaded = load_checkpoint(cfg.at("checkpoint").get<std::string>());
  const AudioBuffer input = wav_read(cfg.at("input_wav").get<std::string>());
  const AngleQuery q = query_from_json(cfg, loaded.model.config.n_sectors);
  const AudioBuffer out = forward_offline(input, q, loaded.model);
  fs::create_directories(args.out_dir);
  wav_write(out, (fs::path(args.out_dir) / "extracted.wav").string());
  write_run_meta(args, "infer", seed);
  std::cout << "wrote extracted.wav (" << out.length() << " samples)\n";
  return 0;
}

int cmd_stream(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto loaded = load_checkpoint(cfg.at("checkpoint").get<std::string>());
  const Model& model = loaded.model;
  const AudioBuffer input = wav_read(cfg.at("input_wav").get<std::string>());
  if (input.channels() != 2) usage_error("input_wav", "need a 2-channel mixture");
  const AngleQuery q = query_from_json(cfg, model.config.n_sectors);

  const int chunk = model.config.chunk_samples;
  const size_t n_chunks = (input.length() + chunk - 1) / chunk;
  StreamState state = StreamState::start(q, model);
  AudioBuffer out(1, n_chunks * chunk);

  std::vector<double> ms_per_chunk;
  ms_per_chunk.reserve(n_chunks);
  std::vector<double> ref(chunk), st(chunk);
  for (size_t k = 0; k < n_chunks; ++k) {
    for (int i = 0; i < chunk; ++i) {
      const size_t idx = k * chunk + i;
      ref[i] = idx < input.length() ? input[0][idx] : 0.0;  // final partial chunk
      st[i] = idx < input.length() ? input[1][idx] : 0.0;   // is zero-padded
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto y = stream_step(ref, st, q, state, model);
    const auto t1 = std::chrono::steady_clock::now();
    ms_per_chunk.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    std::copy(y.begin(), y.end(), out[0].begin() + k * chunk);
  }

  double mean = 0.0;
  for (double v : ms_per_chunk) mean += v;
  mean /= ms_per_chunk.size();
  double var = 0.0;
  for (double v : ms_per_chunk) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / ms_per_chunk.size());

  fs::create_directories(args.out_dir);
  wav_write(out, (fs::path(args.out_dir) / "streamed.wav").string());
  json timing = {{"chunks", n_chunks},
                 {"chunk_ms", 1000.0 * chunk / kSampleRate},
                 {"mean_ms_per_chunk", mean},
                 {"std_ms_per_chunk", stddev}};
  std::ofstream tf(fs::path(args.out_dir) / "stream_timing.json");
  tf << timing.dump(2) << '\n';
  write_run_meta(args, "stream", seed);
  std::cout << "streamed " << n_chunks << " chunks, " << mean << " +/- " << stddev
            << " ms/chunk\n";
  return 0;
}

int cmd_baseline(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto manifest = load_manifest(cfg.at("manifest").get<std::string>());
  const std::string kind = cfg.value("system", "mvdr");
  const int mics = cfg.value("mics", 4);

  SystemUnderTest sys;
  sys.name = kind;
  sys.kind = (kind == "das") ? SystemKind::DelayAndSum : SystemKind::Mvdr;
  sys.geometry = ArrayGeometry::circular(mics, cfg.value("radius_m", 0.05));
  sys.diagonal_loading = cfg.value("diagonal_loading", 1e-3);

  const auto report = evaluate(manifest, {sys});
  fs::create_directories(args.out_dir);
  report_to_csv(report, (fs::path(args.out_dir) / "baseline_rows.csv").string());
  report_to_json(report, (fs::path(args.out_dir) / "baseline_report.json").string());
  write_run_meta(args, "baseline", seed);
  std::cout << kind << " mean SI-SDRi " << mean_si_sdri(report, kind) << " dB\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  if (!cfg.contains("systems") || cfg["systems"].empty())
    usage_error("systems", "expected a non-empty array");

  // Each system may carry its own manifest (e.g. datasets rendered with and
  // without the microstructure share scenes through the seed).
  std::vector<LoadedCheckpoint> keep_alive;
  EvalReport merged;
  for (const auto& s : cfg["systems"]) {
    SystemUnderTest sys;
    sys.name = s.at("name").get<std::string>();
    const std::string kind = s.at("kind").get<std::string>();
    const auto manifest = load_manifest(s.at("manifest").get<std::string>());
    if (kind == "neural") {
      sys.kind = SystemKind::Neural;
      keep_alive.push_back(load_checkpoint(s.at("checkpoint").get<std::string>()));
      sys.model = &keep_alive.back().model;
    } else if (kind == "das" || kind == "mvdr") {
      sys.kind = kind == "das" ? SystemKind::DelayAndSum : SystemKind::Mvdr;
      sys.geometry = ArrayGeometry::circular(s.value("mics", 4),
                                             s.value("radius_m", 0.05));
    } else if (kind == "identity") {
      sys.kind = SystemKind::Identity;
    } else {
      usage_error("systems[].kind", "one of neural | das | mvdr | identity");
    }
    const auto report = evaluate(manifest, {sys});
    merged.rows.insert(merged.rows.end(), report.rows.begin(), report.rows.end());
    merged.aggregates.insert(merged.aggregates.end(), report.aggregates.begin(),
                             report.aggregates.end());
  }

  fs::create_directories(args.out_dir);
  report_to_csv(merged, (fs::path(args.out_dir) / "eval_rows.csv").string());
  report_to_json(merged, (fs::path(args.out_dir) / "eval_report.json").string());
  write_run_meta(args, "eval", seed);
  for (const auto& a : merged.aggregates)
    if (a.group == "all")
      std::cout << a.system << ": mean SI-SDRi " << a.mean_si_sdri_db << " dB ("
                << a.count << " rows, " << 100.0 * a.fraction_positive
                << "% positive)\n";
  return 0;
}

int cmd_mic_sep(const CommonArgs& args) {
  const json cfg = load_config(args);
  const uint64_t seed = effective_seed(args, cfg);
  const auto rooms = rooms_from_json(cfg);
  const auto distances =
      cfg.value("distances_m", std::vector<double>{0.01, 0.08, 0.16});
  const int placements = cfg.value("placements_per_room", 20);

  const auto result = mic_separation_experiment(distances, rooms, placements, seed);

  fs::create_directories(args.out_dir);
  std::ofstream csv(fs::path(args.out_dir) / "mic_separation.csv");
  csv << "distance_m,freq_hz,std_db\n";
  for (size_t d = 0; d < result.distances_m.size(); ++d)
    for (size_t f = 0; f < result.freqs_hz.size(); ++f)
      csv << result.distances_m[d] << ',' << result.freqs_hz[f] << ','
          << result.std_db[d][f] << '\n';
  write_run_meta(args, "mic-sep", seed);
  for (size_t d = 0; d < result.distances_m.size(); ++d)
    std::cout << result.distances_m[d] << " m: mean 1-8 kHz variation "
              << result.mean_std_1_8k_db[d] << " dB\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directional speech extraction laboratory"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const CommonArgs&);
  };
  const Sub subs[] = {
      {"design", "Rank microstructure designs by spatial diversity", cmd_design},
      {"simulate", "Render one scene to a 2-channel wav", cmd_simulate},
      {"gen-data", "Generate a mixture dataset + manifest", cmd_gen_data},
      {"fit-stats", "Fit per-frequency feature normalization stats", cmd_fit_stats},
      {"train", "Train the extraction network", cmd_train},
      {"infer", "Offline extraction on a 2-channel wav", cmd_infer},
      {"stream", "Chunked streaming extraction with timing", cmd_stream},
      {"baseline", "Delay-and-sum / MVDR on array recordings", cmd_baseline},
      {"eval", "SI-SDR evaluation over systems", cmd_eval},
      {"mic-sep", "Mic-separation variation experiment", cmd_mic_sep},
  };

  std::map<std::string, CommonArgs> args_by_cmd;
  std::map<std::string, int (*)(const CommonArgs&)> run_by_cmd;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    auto& a = args_by_cmd[s.name];
    run_by_cmd[s.name] = s.run;
    sub->add_option("config", a.config_path, "JSON config path")->required();
    sub->add_option("--out", a.out_dir, "output directory");
    sub->add_option("--seed", a.seed, "override the config seed");
    sub->add_option("--n-sectors", a.n_sectors, "override the sector count");
  }

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    return run_by_cmd[name](args_by_cmd[name]);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.kind() == ErrorKind::Argument || e.kind() == ErrorKind::Format) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
