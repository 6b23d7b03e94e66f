#include "p2x/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace p2x {

namespace {

void check_same_size(const std::vector<float>& a, const std::vector<float>& b, const char* op) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError(std::string(op) + ": image sizes disagree");
  }
}

}  // namespace

double masked_mae_percent(const std::vector<float>& generated, const std::vector<float>& label) {
  check_same_size(generated, label, "masked_mae_percent");
  double sum_abs = 0.0;
  double max_l = -std::numeric_limits<double>::infinity();
  double min_mask = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    max_l = std::max(max_l, static_cast<double>(label[i]));
    if (label[i] != 0.0f) {
      sum_abs += std::abs(static_cast<double>(generated[i]) - label[i]);
      min_mask = std::min(min_mask, static_cast<double>(label[i]));
      ++count;
    }
  }
  if (count == 0) throw EmptyMaskError("masked_mae_percent: label has no nonzero pixels");
  const double range = max_l - min_mask;
  if (!(range > 0.0)) {
    throw DegenerateDataError("masked_mae_percent: degenerate label range");
  }
  return 100.0 * (sum_abs / static_cast<double>(count)) / range;
}

double masked_psnr(const std::vector<float>& generated, const std::vector<float>& label) {
  check_same_size(generated, label, "masked_psnr");
  double mse = 0.0;
  double peak = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] != 0.0f) {
      const double d = static_cast<double>(generated[i]) - label[i];
      mse += d * d;
      peak = std::max(peak, static_cast<double>(label[i]));
      ++count;
    }
  }
  if (count == 0) throw EmptyMaskError("masked_psnr: label has no nonzero pixels");
  mse /= static_cast<double>(count);
  if (mse == 0.0) return kPsnrCapDb;
  const double value = 10.0 * std::log10(peak * peak / mse);
  return std::min(value, kPsnrCapDb);
}

double mask_fraction(const std::vector<float>& label) {
  std::size_t count = 0;
  for (float v : label) {
    if (v != 0.0f) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(label.size());
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable Gaussian filtering, valid region only: output has
// (rows-10) x (cols-10) entries.
std::vector<double> gaussian_filter_valid(const std::vector<double>& img, int rows, int cols) {
  static const std::vector<double> taps = gaussian_taps();
  const int vw = cols - kSsimWindow + 1;
  const int vh = rows - kSsimWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(rows) * vw);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < vw; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * img[static_cast<std::size_t>(r) * cols + c + k];
      horiz[static_cast<std::size_t>(r) * vw + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw);
  for (int r = 0; r < vh; ++r) {
    for (int c = 0; c < vw; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * horiz[static_cast<std::size_t>(r + k) * vw + c];
      out[static_cast<std::size_t>(r) * vw + c] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const std::vector<float>& generated, const std::vector<float>& label, int rows,
            int cols, std::optional<double> dynamic_range) {
  check_same_size(generated, label, "ssim");
  if (rows < kSsimWindow || cols < kSsimWindow) {
    throw ArgumentError("ssim: images must be at least 11x11");
  }
  if (static_cast<std::size_t>(rows) * cols != label.size()) {
    throw ShapeError("ssim: buffer size does not match rows*cols");
  }

  double range;
  if (dynamic_range) {
    range = *dynamic_range;
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (float v : label) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
    range = hi - lo;
  }
  if (!(range > 0.0)) range = 1.0;
  const double c1 = (kSsimK1 * range) * (kSsimK1 * range);
  const double c2 = (kSsimK2 * range) * (kSsimK2 * range);

  const std::size_t n = label.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = generated[i];
    y[i] = label[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = gaussian_filter_valid(x, rows, cols);
  const auto mu_y = gaussian_filter_valid(y, rows, cols);
  const auto m_xx = gaussian_filter_valid(xx, rows, cols);
  const auto m_yy = gaussian_filter_valid(yy, rows, cols);
  const auto m_xy = gaussian_filter_valid(xy, rows, cols);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double var_x = m_xx[i] - mu_x[i] * mu_x[i];
    const double var_y = m_yy[i] - mu_y[i] * mu_y[i];
    const double cov = m_xy[i] - mu_x[i] * mu_y[i];
    const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_x.size());
}

MetricsSummary summarize(const std::vector<MetricsRecord>& records) {
  MetricsSummary s;
  s.count = records.size();
  if (records.empty()) return s;
  // Streaming (Welford) accumulation; population std.
  double m_mae = 0, m_ssim = 0, m_psnr = 0;
  double s_mae = 0, s_ssim = 0, s_psnr = 0;
  std::size_t k = 0;
  for (const auto& r : records) {
    ++k;
    const double d1 = r.mae_percent - m_mae;
    m_mae += d1 / k;
    s_mae += d1 * (r.mae_percent - m_mae);
    const double d2 = r.ssim - m_ssim;
    m_ssim += d2 / k;
    s_ssim += d2 * (r.ssim - m_ssim);
    const double d3 = r.psnr_db - m_psnr;
    m_psnr += d3 / k;
    s_psnr += d3 * (r.psnr_db - m_psnr);
  }
  s.mae_mean = m_mae;
  s.ssim_mean = m_ssim;
  s.psnr_mean = m_psnr;
  s.mae_std = std::sqrt(s_mae / k);
  s.ssim_std = std::sqrt(s_ssim / k);
  s.psnr_std = std::sqrt(s_psnr / k);
  return s;
}

std::vector<MetricsRecord> evaluate_set(const InferFn& infer, const DatasetManifest& manifest,
                                        const std::string& base_dir) {
  const auto test_idx = sample_indices(manifest, Split::test);
  if (test_idx.empty()) throw ArgumentError("evaluate_set: empty test set");

  std::vector<MetricsRecord> records;
  records.reserve(test_idx.size());
  for (std::size_t idx : test_idx) {
    PairedSample sample = load_sample(manifest, base_dir, idx);
    const std::vector<float> gen = infer(sample);

    MetricsRecord rec;
    rec.subject_id = sample.subject_id;
    rec.azimuth_deg = sample.pose.azimuth_deg;
    rec.inclination_deg = sample.pose.inclination_deg;
    rec.mae_percent = masked_mae_percent(gen, sample.label_raw);
    rec.ssim = ssim(gen, sample.label_raw, sample.rows, sample.cols);
    rec.psnr_db = masked_psnr(gen, sample.label_raw);
    rec.mask_fraction = mask_fraction(sample.label_raw);
    records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
    if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
    return a.azimuth_deg < b.azimuth_deg;
  });
  return records;
}

std::vector<MetricsRecord> evaluate_set(const nn::Generator& generator,
                                        const DatasetManifest& manifest,
                                        const std::string& base_dir) {
  return evaluate_set(
      [&](const PairedSample& sample) {
        auto out = generator.forward(nn::constant(sample.input));
        std::vector<float> gen = std::move(out->value.data);
        denormalize(gen, manifest.label_stats_for(sample.subject_id));
        return gen;
      },
      manifest, base_dir);
}

std::string metrics_csv(const std::vector<MetricsRecord>& records, const MetricsSummary& summary,
                        const ArtifactStamp& stamp) {
  std::string s;
  s += "# p2x metrics format_version=" + std::to_string(stamp.format_version) + " config_hash=" +
       stamp.config_hash + " seed=" + std::to_string(stamp.seed) + "\n";
  s += "# mae_basis=range_relative (mean |G-L| over nonzero-label mask / (max(L)-min_mask(L)))\n";
  s += "# psnr_peak=label_mask_max ssim=unmasked\n";
  s += "subject_id,azimuth_deg,inclination_deg,mae_percent,ssim,psnr_db,mask_fraction\n";
  for (const auto& r : records) {
    s += r.subject_id + "," + format_double(r.azimuth_deg) + "," +
         format_double(r.inclination_deg) + "," + format_double(r.mae_percent) + "," +
         format_double(r.ssim) + "," + format_double(r.psnr_db) + "," +
         format_double(r.mask_fraction) + "\n";
  }
  s += "# summary n=" + std::to_string(summary.count) + "\n";
  s += "# mae_percent " + format_double(summary.mae_mean) + " +- " + format_double(summary.mae_std) +
       "\n";
  s += "# ssim " + format_double(summary.ssim_mean) + " +- " + format_double(summary.ssim_std) + "\n";
  s += "# psnr_db " + format_double(summary.psnr_mean) + " +- " + format_double(summary.psnr_std) +
       "\n";
  return s;
}

std::vector<AngleRow> per_angle_rows(const std::vector<MetricsRecord>& records) {
  std::map<double, std::vector<const MetricsRecord*>> by_angle;
  for (const auto& r : records) by_angle[r.azimuth_deg].push_back(&r);
  std::vector<AngleRow> rows;
  rows.reserve(by_angle.size());
  for (const auto& [angle, recs] : by_angle) {
    AngleRow row;
    row.angle_deg = angle;
    for (const auto* r : recs) {
      row.mae_percent += r->mae_percent;
      row.ssim += r->ssim;
      row.psnr_db += r->psnr_db;
    }
    row.mae_percent /= static_cast<double>(recs.size());
    row.ssim /= static_cast<double>(recs.size());
    row.psnr_db /= static_cast<double>(recs.size());
    rows.push_back(row);
  }
  return rows;
}

std::string per_angle_csv(const std::vector<AngleRow>& rows, const ArtifactStamp& stamp) {
  std::string s;
  s += "# p2x per-angle report format_version=" + std::to_string(stamp.format_version) +
       " config_hash=" + stamp.config_hash + " seed=" + std::to_string(stamp.seed) + "\n";
  s += "# angle convention: trajectory angle 0 deg denotes an RAO angle of 90 deg; "
       "180 deg denotes 90 deg LAO\n";
  s += "angle_deg,mae_percent,ssim,psnr_db\n";
  for (const auto& r : rows) {
    s += format_double(r.angle_deg) + "," + format_double(r.mae_percent) + "," +
         format_double(r.ssim) + "," + format_double(r.psnr_db) + "\n";
  }
  return s;
}

}  // namespace p2x
