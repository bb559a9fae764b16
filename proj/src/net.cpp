#include "dsx/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dsx {

void NetConfig::validate() const {
  if (n_sectors != 6 && n_sectors != 9)
    fail(ErrorKind::Argument, "n_sectors must be 6 or 9");
  if (hop != chunk_samples)
    fail(ErrorKind::Argument, "chunk_samples must equal the hop");
  if (window_len - hop != lookahead_samples)
    fail(ErrorKind::Argument, "lookahead must equal window_len - hop");
  if (embed_channels < 2 || n_blocks < 1 || freq_downsample < 1 ||
      blstm_hidden < 1 || causal_lstm_hidden < 1)
    fail(ErrorKind::Argument, "degenerate net config");
}

void AngleQuery::validate() const {
  if (n_sectors != 6 && n_sectors != 9)
    fail(ErrorKind::Argument, "n_sectors must be 6 or 9");
  if (selected == 0) fail(ErrorKind::Argument, "empty sector selection");
  if (selected >> n_sectors)
    fail(ErrorKind::Argument, "selection bits beyond n_sectors");
  if (__builtin_popcount(selected) > 3)
    fail(ErrorKind::Argument, "at most 3 sectors may be selected");
}

std::vector<double> raw_angle_vector(const AngleQuery& query) {
  query.validate();
  std::vector<double> v(query.n_sectors, 0.0);
  for (int i = 0; i < query.n_sectors; ++i) {
    if (query.selected & (1u << i)) {
      v[i] = 1.0;
      continue;
    }
    const bool left = i > 0 && (query.selected & (1u << (i - 1)));
    const bool right =
        i + 1 < query.n_sectors && (query.selected & (1u << (i + 1)));
    if (left || right) v[i] = 0.25;
  }
  return v;
}

BlockStates BlockStates::zeros(int n_blocks, long batch, long model_bins,
                               long hidden) {
  BlockStates s;
  for (int i = 0; i < n_blocks; ++i) {
    s.h.push_back(Tensor::zeros({batch, model_bins, hidden}));
    s.c.push_back(Tensor::zeros({batch, model_bins, hidden}));
  }
  return s;
}

namespace {
std::string block_key(int i, const char* name) {
  return "block" + std::to_string(i) + "." + name;
}
}  // namespace

Model Model::init(const NetConfig& config, const NormStats& stats,
                  uint64_t seed) {
  config.validate();
  stats.validate(config.bins());
  Model m;
  m.config = config;
  m.stats = stats;

  Rng rng(hash_seed(seed, 0x11117u));
  const long S = config.n_sectors;
  const long c = config.embed_channels;
  const long Fp = config.model_bins();
  const long hb = config.blstm_hidden;
  const long hc = config.causal_lstm_hidden;
  const long k = config.freq_downsample;

  auto& P = m.params;
  P["angle.w1"] = init_uniform({S, S}, S, rng);
  P["angle.b1"] = Tensor::zeros({S}, true);
  P["angle.alpha"] = Tensor::full({S}, 0.25, true);
  P["angle.w2"] = init_uniform({S, Fp * c}, S, rng);
  P["angle.b2"] = Tensor::zeros({Fp * c}, true);
  P["angle.ln_g"] = Tensor::full({c}, 1.0, true);
  P["angle.ln_b"] = Tensor::zeros({c}, true);

  // Encoder/decoder start as an exact passthrough of the reference channel:
  // channels 2*kk and 2*kk+1 carry Re/Im of patch bin kk and the decoder
  // reads them back, so the untrained network is the identity on x_ref and
  // training only has to learn the correction. Remaining channels start
  // random on the encoder side (they feed the spatial features to the
  // blocks) and at zero on the decoder side.
  if (c < 2 * k + 1)
    fail(ErrorKind::Argument, "embed_channels must exceed 2*freq_downsample");
  {
    Tensor enc = init_uniform({1, k, 7, c}, 7 * k, rng);
    Tensor dec = Tensor::zeros({1, k, c, 2}, true);
    for (long kk = 0; kk < k; ++kk) {
      for (long f = 0; f < 7; ++f) {
        double* row = enc.data() + (kk * 7 + f) * c;
        for (long ch = 0; ch < 2 * k; ++ch) {
          const bool re_slot = (f == kFeatReX1 && ch == 2 * kk);
          const bool im_slot = (f == kFeatImX1 && ch == 2 * kk + 1);
          row[ch] = (re_slot || im_slot) ? 1.0 : 0.0;
        }
      }
      dec.data()[(kk * c + 2 * kk) * 2 + 0] = 1.0;
      dec.data()[(kk * c + 2 * kk + 1) * 2 + 1] = 1.0;
    }
    P["enc.w"] = enc;
    P["enc.b"] = Tensor::zeros({c}, true);
    P["dec.w"] = dec;  // bias-free decoder
  }

  for (int i = 0; i < config.n_blocks; ++i) {
    P[block_key(i, "ln1_g")] = Tensor::full({c}, 1.0, true);
    P[block_key(i, "ln1_b")] = Tensor::zeros({c}, true);
    P[block_key(i, "prelu")] = Tensor::full({c}, 0.25, true);
    auto bf = init_lstm(c, hb, rng);
    P[block_key(i, "blstm_f.wx")] = bf.wx;
    P[block_key(i, "blstm_f.wh")] = bf.wh;
    P[block_key(i, "blstm_f.b")] = bf.b;
    auto bb = init_lstm(c, hb, rng);
    P[block_key(i, "blstm_b.wx")] = bb.wx;
    P[block_key(i, "blstm_b.wh")] = bb.wh;
    P[block_key(i, "blstm_b.b")] = bb.b;
    P[block_key(i, "proj.w")] = init_uniform({2 * hb, c}, 2 * hb, rng);
    P[block_key(i, "proj.b")] = Tensor::zeros({c}, true);
    P[block_key(i, "ln2_g")] = Tensor::full({c}, 1.0, true);
    P[block_key(i, "ln2_b")] = Tensor::zeros({c}, true);
    auto tl = init_lstm(c, hc, rng);
    P[block_key(i, "tlstm.wx")] = tl.wx;
    P[block_key(i, "tlstm.wh")] = tl.wh;
    P[block_key(i, "tlstm.b")] = tl.b;
    // Zero-init FC gates each block off at the start (the whole network is
    // then the reference-channel passthrough); gradients reach fc.w through
    // the random FiLM gamma path from step one. The additive FiLM path also
    // starts at zero so a silent input stays silent through every block.
    P[block_key(i, "fc.w")] = Tensor::zeros({hc, c}, true);
    P[block_key(i, "fc.b")] = Tensor::zeros({c}, true);
    P[block_key(i, "film_g.w")] = init_uniform({c, c}, c, rng);
    P[block_key(i, "film_g.b")] = Tensor::zeros({c}, true);
    P[block_key(i, "film_b.w")] = Tensor::zeros({c, c}, true);
    P[block_key(i, "film_b.b")] = Tensor::zeros({c}, true);
  }
  return m;
}

const Tensor& Model::p(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) fail(ErrorKind::Compatibility, "missing parameter " + name);
  return it->second;
}

namespace {

// y = x @ w + b applied to the last dim of a 4-d tensor.
Tensor linear_lastdim(const Tensor& x, const Tensor& w, const Tensor& b) {
  const long rows = static_cast<long>(x.numel()) / x.dim(x.ndim() - 1);
  Tensor flat = reshape(x, {rows, x.dim(x.ndim() - 1)});
  Tensor y = add(matmul(flat, w), b);
  std::vector<long> shape = x.shape();
  shape.back() = w.dim(1);
  return reshape(y, shape);
}

}  // namespace

Tensor Model::angle_embedding(const AngleQuery& query) const {
  if (query.n_sectors != config.n_sectors)
    fail(ErrorKind::Compatibility, "query sector count does not match checkpoint");
  const auto raw = raw_angle_vector(query);
  Tensor v = Tensor::from(raw, {1, static_cast<long>(raw.size())});
  Tensor h = prelu(add(matmul(v, p("angle.w1")), p("angle.b1")), p("angle.alpha"));
  Tensor e = add(matmul(h, p("angle.w2")), p("angle.b2"));
  Tensor em = reshape(e, {config.model_bins(), config.embed_channels});
  return layer_norm(em, p("angle.ln_g"), p("angle.ln_b"));
}

Tensor Model::forward_spectrum(const Tensor& features, const Tensor& embedding,
                               BlockStates& states) const {
  const long Fp = config.padded_bins();
  if (features.ndim() != 4 || features.dim(2) != Fp || features.dim(3) != 7)
    fail(ErrorKind::Shape, "features must be (B, T, padded_bins, 7)");
  if (static_cast<int>(states.h.size()) != config.n_blocks)
    fail(ErrorKind::Compatibility, "stream state does not match n_blocks");

  Tensor x = conv2d(features, p("enc.w"), 1, config.freq_downsample);
  x = add(x, p("enc.b"));

  for (int i = 0; i < config.n_blocks; ++i) {
    Tensor t = layer_norm(x, p(block_key(i, "ln1_g")), p(block_key(i, "ln1_b")));
    t = prelu(t, p(block_key(i, "prelu")));
    LstmWeights bf{p(block_key(i, "blstm_f.wx")), p(block_key(i, "blstm_f.wh")),
                   p(block_key(i, "blstm_f.b"))};
    LstmWeights bb{p(block_key(i, "blstm_b.wx")), p(block_key(i, "blstm_b.wh")),
                   p(block_key(i, "blstm_b.b"))};
    t = lstm_freq_bidir(t, bf, bb);
    t = linear_lastdim(t, p(block_key(i, "proj.w")), p(block_key(i, "proj.b")));
    t = layer_norm(t, p(block_key(i, "ln2_g")), p(block_key(i, "ln2_b")));
    LstmWeights tl{p(block_key(i, "tlstm.wx")), p(block_key(i, "tlstm.wh")),
                   p(block_key(i, "tlstm.b"))};
    Tensor h_last, c_last;
    t = lstm_time(t, tl, &states.h[i], &states.c[i], &h_last, &c_last);
    states.h[i] = h_last;
    states.c[i] = c_last;
    t = linear_lastdim(t, p(block_key(i, "fc.w")), p(block_key(i, "fc.b")));

    Tensor gamma = add(matmul(embedding, p(block_key(i, "film_g.w"))),
                       p(block_key(i, "film_g.b")));
    Tensor beta = add(matmul(embedding, p(block_key(i, "film_b.w"))),
                      p(block_key(i, "film_b.b")));
    Tensor e_sep = add(mul(t, gamma), beta);
    x = add(x, e_sep);
  }

  Tensor y = conv_transpose2d(x, p("dec.w"), 1, config.freq_downsample);
  return slice(y, 2, 0, config.bins());
}

Tensor Model::assemble_features(const Spectrogram& spec) const {
  const FeatureStack stack = encode_features(spec, stats);
  const long T = stack.frames;
  const long F = stack.bins;
  const long Fp = config.padded_bins();
  std::vector<double> data(static_cast<size_t>(T) * Fp * 7, 0.0);
  for (long t = 0; t < T; ++t)
    for (long f = 0; f < F; ++f) {
      double* dst = data.data() + (t * Fp + f) * 7;
      const size_t i = static_cast<size_t>(t) * F + f;
      for (int ch = 0; ch < 7; ++ch) dst[ch] = stack.data[ch][i];
    }
  return Tensor::from(std::move(data), {1, T, Fp, 7});
}

AudioBuffer forward_offline(const AudioBuffer& two_channel, const AngleQuery& query,
                            const Model& model) {
  if (two_channel.channels() != 2)
    fail(ErrorKind::Shape, "forward_offline expects 2 channels");
  query.validate();
  if (query.n_sectors != model.config.n_sectors)
    fail(ErrorKind::Compatibility, "query sector count does not match checkpoint");
  const FrameSpec frame = model.config.frame();
  if (two_channel.length() < static_cast<size_t>(frame.pad))
    fail(ErrorKind::Size, "input shorter than one frame");

  const Spectrogram spec = stft(two_channel, frame);
  Tensor features = model.assemble_features(spec);
  Tensor embedding = model.angle_embedding(query);
  BlockStates states =
      BlockStates::zeros(model.config.n_blocks, 1, model.config.model_bins(),
                         model.config.causal_lstm_hidden);
  Tensor spectrum = model.forward_spectrum(features, embedding, states);
  Tensor wave = wola_synthesis(spectrum, frame, two_channel.length());

  AudioBuffer out(1, two_channel.length());
  std::memcpy(out[0].data(), wave.data(), two_channel.length() * sizeof(double));
  return out;
}

StreamState StreamState::start(const AngleQuery& query, const Model& model) {
  query.validate();
  if (query.n_sectors != model.config.n_sectors)
    fail(ErrorKind::Compatibility, "query sector count does not match checkpoint");
  StreamState s;
  s.query = query;
  s.n_blocks = model.config.n_blocks;
  s.pending.assign(2, std::vector<double>(model.config.lookahead_samples, 0.0));
  s.states = BlockStates::zeros(model.config.n_blocks, 1, model.config.model_bins(),
                                model.config.causal_lstm_hidden);
  s.ola_tail.assign(model.config.lookahead_samples, 0.0);
  s.embedding = model.angle_embedding(query);
  return s;
}

std::vector<double> stream_step(const std::vector<double>& ref_chunk,
                                const std::vector<double>& struct_chunk,
                                const AngleQuery& query, StreamState& state,
                                const Model& model) {
  const int T = model.config.chunk_samples;
  const int pad = model.config.lookahead_samples;
  const int win = model.config.window_len;
  if (static_cast<int>(ref_chunk.size()) != T ||
      static_cast<int>(struct_chunk.size()) != T)
    fail(ErrorKind::Argument, "stream_step needs exactly chunk_samples per channel");
  if (query.selected != state.query.selected ||
      query.n_sectors != state.query.n_sectors)
    fail(ErrorKind::Compatibility,
         "query changed mid-stream; reset the stream state first");
  if (static_cast<int>(state.pending[0].size()) != pad ||
      state.n_blocks != model.config.n_blocks)
    fail(ErrorKind::Compatibility, "stream state does not match checkpoint");

  const FrameSpec frame = model.config.frame();

  // Assemble the analysis frame: carried lookahead + new chunk.
  Spectrogram spec;
  spec.bins = frame.bins();
  spec.frames = 1;
  spec.data.assign(2, std::vector<std::complex<double>>(spec.bins));
  std::vector<double> windowed(win);
  for (int ch = 0; ch < 2; ++ch) {
    const auto& chunk = (ch == 0) ? ref_chunk : struct_chunk;
    for (int i = 0; i < pad; ++i)
      windowed[i] = state.pending[ch][i] * frame.analysis_window[i];
    for (int i = 0; i < T; ++i)
      windowed[pad + i] = chunk[i] * frame.analysis_window[pad + i];
    dft_frame(windowed.data(), win, spec.data[ch].data());
    // Carry the last `pad` input samples for the next frame.
    std::copy(chunk.end() - pad, chunk.end(), state.pending[ch].begin());
  }

  Tensor features = model.assemble_features(spec);
  Tensor spectrum = model.forward_spectrum(features, state.embedding, state.states);

  // Synthesize this frame and overlap-add against the carried tail.
  std::vector<std::complex<double>> bins(frame.bins());
  const double* y = spectrum.data();
  for (int f = 0; f < frame.bins(); ++f) bins[f] = {y[2 * f], y[2 * f + 1]};
  std::vector<double> frame_samples(win);
  idft_frame(bins.data(), win, frame_samples.data());
  for (int i = 0; i < win; ++i) frame_samples[i] *= frame.synthesis_window[i];

  std::vector<double> out(T, 0.0);
  for (int i = 0; i < T; ++i) {
    out[i] = frame_samples[i];
    if (i < pad) out[i] = state.ola_tail[i] + out[i];
  }
  for (int i = 0; i < pad; ++i) state.ola_tail[i] = frame_samples[T + i];
  state.frames_emitted += 1;
  return out;
}

Tensor si_sdr_loss(const Tensor& est, const Tensor& target, bool target_present,
                   double lambda) {
  if (est.numel() != target.numel())
    fail(ErrorKind::Shape, "est/target length mismatch");
  if (!target_present) {
    return scale(mean_all(abs_t(sub(est, target))), lambda);
  }
  double energy = 0.0;
  for (size_t i = 0; i < target.numel(); ++i)
    energy += target.data()[i] * target.data()[i];
  if (energy < 1e-12)
    fail(ErrorKind::Degenerate, "zero target with target_present set");

  Tensor dot = sum_all(mul(est, target));
  Tensor norm = sum_all(mul(target, target));
  Tensor alpha = div(dot, norm);
  Tensor scaled = mul(target, alpha);
  Tensor num = sum_all(mul(scaled, scaled));
  Tensor err = sub(scaled, est);
  Tensor den = add(sum_all(mul(err, err)), Tensor::scalar(1e-12));
  Tensor ratio = div(num, den);
  return scale(log10_clamped(ratio, 1e-10, 1e10), -10.0);
}

}  // namespace dsx
