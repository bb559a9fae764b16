#include "dsx/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace dsx {

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void put_f32(std::ofstream& f, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(f, u);
}

void put_blob(std::ofstream& f, const std::string& s) {
  put_u32(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::vector<unsigned char> bytes;
  size_t pos = 0;
  std::string path;

  void need(size_t n) const {
    if (pos + n > bytes.size())
      fail(ErrorKind::Compatibility, "truncated checkpoint: " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = bytes[pos] | (bytes[pos + 1] << 8) | (bytes[pos + 2] << 16) |
                 (static_cast<uint32_t>(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string blob() {
    const uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

json config_to_json(const NetConfig& c) {
  return json{{"n_sectors", c.n_sectors},
              {"chunk_samples", c.chunk_samples},
              {"lookahead_samples", c.lookahead_samples},
              {"window_len", c.window_len},
              {"hop", c.hop},
              {"embed_channels", c.embed_channels},
              {"n_blocks", c.n_blocks},
              {"freq_downsample", c.freq_downsample},
              {"blstm_hidden", c.blstm_hidden},
              {"causal_lstm_hidden", c.causal_lstm_hidden}};
}

NetConfig config_from_json(const json& j) {
  NetConfig c;
  c.n_sectors = j.at("n_sectors").get<int>();
  c.chunk_samples = j.at("chunk_samples").get<int>();
  c.lookahead_samples = j.at("lookahead_samples").get<int>();
  c.window_len = j.at("window_len").get<int>();
  c.hop = j.at("hop").get<int>();
  c.embed_channels = j.at("embed_channels").get<int>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.freq_downsample = j.at("freq_downsample").get<int>();
  c.blstm_hidden = j.at("blstm_hidden").get<int>();
  c.causal_lstm_hidden = j.at("causal_lstm_hidden").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const Model& model, const TrainMeta& meta,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);

  f.write("SSDX", 4);
  put_u32(f, kCheckpointVersion);
  put_blob(f, config_to_json(model.config).dump());

  // Stats: bins, then mean/var per spatial feature as f32.
  put_u32(f, static_cast<uint32_t>(model.stats.bins));
  for (int k = 0; k < 3; ++k)
    for (int b = 0; b < model.stats.bins; ++b)
      put_f32(f, static_cast<float>(model.stats.mean[k][b]));
  for (int k = 0; k < 3; ++k)
    for (int b = 0; b < model.stats.bins; ++b)
      put_f32(f, static_cast<float>(model.stats.var[k][b]));

  put_u32(f, static_cast<uint32_t>(model.params.size()));
  for (const auto& [name, tensor] : model.params) {  // std::map: lexicographic
    put_blob(f, name);
    put_u32(f, static_cast<uint32_t>(tensor.ndim()));
    for (int d = 0; d < tensor.ndim(); ++d)
      put_u32(f, static_cast<uint32_t>(tensor.dim(d)));
    for (size_t i = 0; i < tensor.numel(); ++i)
      put_f32(f, static_cast<float>(tensor.data()[i]));
  }

  json mj = {{"seed", meta.seed},
             {"epochs", meta.epochs},
             {"epoch_losses", meta.epoch_losses},
             {"final_loss", meta.final_loss},
             {"prng_algorithm", kPrngAlgorithm}};
  put_blob(f, mj.dump());
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);
  Reader r;
  r.path = path;
  r.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());

  r.need(4);
  if (std::memcmp(r.bytes.data(), "SSDX", 4) != 0)
    fail(ErrorKind::Compatibility, "bad checkpoint magic: " + path);
  r.pos = 4;
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::Compatibility, "unsupported checkpoint version");

  LoadedCheckpoint out;
  json cfg = json::parse(r.blob(), nullptr, false);
  if (cfg.is_discarded()) fail(ErrorKind::Compatibility, "bad config blob");
  out.model.config = config_from_json(cfg);

  const uint32_t bins = r.u32();
  if (bins != static_cast<uint32_t>(out.model.config.bins()))
    fail(ErrorKind::Compatibility, "stats bins do not match config");
  NormStats stats;
  stats.bins = static_cast<int>(bins);
  stats.mean.assign(3, std::vector<double>(bins));
  stats.var.assign(3, std::vector<double>(bins));
  for (int k = 0; k < 3; ++k)
    for (uint32_t b = 0; b < bins; ++b) stats.mean[k][b] = r.f32();
  for (int k = 0; k < 3; ++k)
    for (uint32_t b = 0; b < bins; ++b) stats.var[k][b] = r.f32();
  out.model.stats = std::move(stats);

  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.blob();
    const uint32_t nd = r.u32();
    if (nd > 8) fail(ErrorKind::Compatibility, "implausible tensor rank");
    std::vector<long> shape(nd);
    size_t numel = 1;
    for (uint32_t d = 0; d < nd; ++d) {
      shape[d] = static_cast<long>(r.u32());
      numel *= static_cast<size_t>(shape[d]);
    }
    r.need(numel * 4);
    std::vector<double> data(numel);
    for (size_t e = 0; e < numel; ++e) data[e] = r.f32();
    out.model.params[name] = Tensor::from(std::move(data), std::move(shape), true);
  }

  json mj = json::parse(r.blob(), nullptr, false);
  if (mj.is_discarded()) fail(ErrorKind::Compatibility, "bad metadata blob");
  out.meta.seed = mj.value("seed", 0ULL);
  out.meta.epochs = mj.value("epochs", 0);
  out.meta.epoch_losses = mj.value("epoch_losses", std::vector<double>{});
  out.meta.final_loss = mj.value("final_loss", 0.0);
  return out;
}

}  // namespace dsx
