#include "dsx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

using nlohmann::json;

namespace dsx {

double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) fail(ErrorKind::Shape, "si_sdr length mismatch");
  double energy = 0.0, dot = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    energy += ref[i] * ref[i];
    dot += est[i] * ref[i];
  }
  if (energy < 1e-12) fail(ErrorKind::Degenerate, "si_sdr: zero reference");
  const double alpha = dot / energy;
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    num += s * s;
    den += (s - est[i]) * (s - est[i]);
  }
  den += 1e-12;
  const double ratio = std::clamp(num / den, 1e-10, 1e10);
  return 10.0 * std::log10(ratio);
}

namespace {

std::vector<double> tail_from(const std::vector<double>& x, size_t start) {
  if (start >= x.size()) fail(ErrorKind::Size, "metric segment is empty");
  return std::vector<double>(x.begin() + start, x.end());
}

std::vector<double> beamform_record(const SystemUnderTest& sys,
                                    const AudioBuffer& array_audio,
                                    const MixtureRecord& rec,
                                    const FrameSpec& frame, size_t head_len) {
  const Spectrogram spec = stft(array_audio, frame);
  const auto angles = sector_steer(rec.selected_sectors, rec.n_sectors);

  Spectrogram summed;
  summed.bins = spec.bins;
  summed.frames = spec.frames;
  summed.data.assign(1, std::vector<std::complex<double>>(
                            static_cast<size_t>(spec.bins) * spec.frames, {0, 0}));
  for (double angle : angles) {
    Spectrogram y;
    if (sys.kind == SystemKind::DelayAndSum) {
      y = delay_and_sum(spec, angle, sys.geometry);
    } else {
      MvdrConfig cfg;
      cfg.diagonal_loading = sys.diagonal_loading;
      // Frames fully inside the interferer-only head.
      cfg.noise_frames_begin = (frame.pad + frame.hop - 1) / frame.hop;
      cfg.noise_frames_end = static_cast<int>(
          (static_cast<long>(head_len) - frame.window_len + frame.pad) / frame.hop + 1);
      if (cfg.noise_frames_end > spec.frames) cfg.noise_frames_end = spec.frames;
      y = mvdr(spec, angle, sys.geometry, cfg);
    }
    for (size_t i = 0; i < y.data[0].size(); ++i) summed.data[0][i] += y.data[0][i];
  }
  AudioBuffer wave = istft(summed, frame, array_audio.length());
  return wave[0];
}

}  // namespace

EvalReport evaluate(const MixtureManifest& manifest,
                    const std::vector<SystemUnderTest>& systems) {
  if (systems.empty()) fail(ErrorKind::Argument, "no systems to evaluate");
  for (const auto& sys : systems)
    if (sys.kind == SystemKind::Neural && sys.model == nullptr)
      fail(ErrorKind::Argument, "neural system needs a checkpoint: " + sys.name);

  EvalReport report;
  const size_t head_len =
      static_cast<size_t>(manifest.noise_head_s * kSampleRate);

  for (const auto& rec : manifest.records) {
    if (!rec.target_present()) continue;

    const AudioBuffer mix = wav_read(resolve_path(manifest, rec.mixture_wav_path));
    const AudioBuffer tgt = wav_read(resolve_path(manifest, rec.target_wav_path));
    const auto target_seg = tail_from(tgt[0], head_len);
    const auto input_seg = tail_from(mix[0], head_len);
    const double input_score = si_sdr(input_seg, target_seg);

    for (const auto& sys : systems) {
      std::vector<double> out;
      switch (sys.kind) {
        case SystemKind::Identity:
          out = mix[0];
          break;
        case SystemKind::Neural: {
          AngleQuery q{rec.n_sectors, rec.selected_sectors};
          out = forward_offline(mix, q, *sys.model)[0];
          break;
        }
        case SystemKind::DelayAndSum:
        case SystemKind::Mvdr: {
          if (!rec.array_wav_path)
            fail(ErrorKind::Argument, "record lacks array channels: " + rec.id);
          const AudioBuffer arr =
              wav_read(resolve_path(manifest, *rec.array_wav_path));
          if (arr.channels() != sys.geometry.count())
            fail(ErrorKind::Shape, "array channel count mismatch: " + rec.id);
          out = beamform_record(sys, arr, rec,
                                FrameSpec::hann(), head_len);
          break;
        }
      }
      EvalRow row;
      row.record_id = rec.id;
      row.system = sys.name;
      row.n_sectors = rec.n_sectors;
      row.selected_sectors = rec.selected_sectors;
      row.n_selected = __builtin_popcount(rec.selected_sectors);
      row.input_si_sdr_db = input_score;
      row.output_si_sdr_db = si_sdr(tail_from(out, head_len), target_seg);
      row.si_sdri_db = row.output_si_sdr_db - row.input_si_sdr_db;
      report.rows.push_back(std::move(row));
    }
  }

  // Aggregates: per system overall, per selected-sector count, and per sector
  // index over single-sector rows.
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& row : report.rows) {
    groups[{row.system, "all"}].push_back(row.si_sdri_db);
    groups[{row.system, "k=" + std::to_string(row.n_selected)}].push_back(
        row.si_sdri_db);
    if (row.n_selected == 1) {
      int sector = 1;
      while (!(row.selected_sectors & (1u << (sector - 1)))) ++sector;
      groups[{row.system, "sector=" + std::to_string(sector)}].push_back(
          row.si_sdri_db);
    }
  }
  for (const auto& [key, values] : groups) {
    EvalAggregate agg;
    agg.system = key.first;
    agg.group = key.second;
    agg.count = static_cast<int>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0.0;
    int pos = 0;
    for (double v : values) {
      var += (v - mean) * (v - mean);
      if (v > 0.0) ++pos;
    }
    agg.mean_si_sdri_db = mean;
    agg.std_si_sdri_db = std::sqrt(var / values.size());
    agg.fraction_positive = static_cast<double>(pos) / values.size();
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

void report_to_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << "record_id,system,n_sectors,selected_sectors,n_selected,"
       "input_si_sdr_db,output_si_sdr_db,si_sdri_db\n";
  for (const auto& r : report.rows)
    f << r.record_id << ',' << r.system << ',' << r.n_sectors << ','
      << r.selected_sectors << ',' << r.n_selected << ',' << r.input_si_sdr_db
      << ',' << r.output_si_sdr_db << ',' << r.si_sdri_db << '\n';
}

void report_to_json(const EvalReport& report, const std::string& path) {
  json aggs = json::array();
  for (const auto& a : report.aggregates)
    aggs.push_back({{"system", a.system},
                    {"group", a.group},
                    {"count", a.count},
                    {"mean_si_sdri_db", a.mean_si_sdri_db},
                    {"std_si_sdri_db", a.std_si_sdri_db},
                    {"fraction_positive", a.fraction_positive}});
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f << json{{"aggregates", aggs}}.dump(2) << '\n';
}

double mean_si_sdri(const EvalReport& report, const std::string& system,
                    int n_selected) {
  double acc = 0.0;
  int count = 0;
  for (const auto& row : report.rows) {
    if (row.system != system) continue;
    if (n_selected != 0 && row.n_selected != n_selected) continue;
    acc += row.si_sdri_db;
    ++count;
  }
  if (count == 0) fail(ErrorKind::Argument, "no rows for system " + system);
  return acc / count;
}

}  // namespace dsx
