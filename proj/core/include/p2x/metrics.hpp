#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "p2x/dataset.hpp"
#include "p2x/model.hpp"

namespace p2x {

class EmptyMaskError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Masked metrics consider only pixels that are nonzero in the label image;
// both inputs live in the label intensity domain.

// mean |G-L| over {L != 0} divided by (max(L) - min over mask of L), x100.
double masked_mae_percent(const std::vector<float>& generated, const std::vector<float>& label);

// 10*log10(peak^2 / masked MSE) with peak = max(L) over the mask; capped at
// the 99 dB sentinel (identical images hit the cap).
double masked_psnr(const std::vector<float>& generated, const std::vector<float>& label);

inline constexpr double kPsnrCapDb = 99.0;

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid window centers only, unmasked. The dynamic range defaults to
// max(L)-min(L); pass an explicit range to symmetrize.
double ssim(const std::vector<float>& generated, const std::vector<float>& label, int rows,
            int cols, std::optional<double> dynamic_range = std::nullopt);

double mask_fraction(const std::vector<float>& label);

struct MetricsRecord {
  std::string subject_id;
  double azimuth_deg = 0.0;
  double inclination_deg = 0.0;
  double mae_percent = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;
  double mask_fraction = 0.0;
};

struct MetricsSummary {
  std::size_t count = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
  double psnr_mean = 0.0, psnr_std = 0.0;
};

MetricsSummary summarize(const std::vector<MetricsRecord>& records);

// Produces the generated image in the raw label intensity domain.
using InferFn = std::function<std::vector<float>(const PairedSample&)>;

// Scores every test sample of the manifest against its raw label. Records are
// sorted by (subject, azimuth).
std::vector<MetricsRecord> evaluate_set(const InferFn& infer, const DatasetManifest& manifest,
                                        const std::string& base_dir);

// Convenience wrapper: forward pass + denormalization with the manifest's
// label statistics.
std::vector<MetricsRecord> evaluate_set(const nn::Generator& generator,
                                        const DatasetManifest& manifest,
                                        const std::string& base_dir);

std::string metrics_csv(const std::vector<MetricsRecord>& records, const MetricsSummary& summary,
                        const ArtifactStamp& stamp);

struct AngleRow {
  double angle_deg = 0.0;
  double mae_percent = 0.0;
  double ssim = 0.0;
  double psnr_db = 0.0;
};

// Per-azimuth curves averaged across subjects; opposing angles stay separate.
std::vector<AngleRow> per_angle_rows(const std::vector<MetricsRecord>& records);
std::string per_angle_csv(const std::vector<AngleRow>& rows, const ArtifactStamp& stamp);

}  // namespace p2x
