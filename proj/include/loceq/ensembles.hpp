#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loceq/graph_analysis.hpp"
#include "loceq/sparse.hpp"
#include "loceq/spin_model.hpp"
#include "loceq/stats.hpp"

namespace loceq {

enum class Variant { kExh, kExa, kBrf, kBvf, kBrc, kReg };

inline constexpr Variant kAllVariants[] = {Variant::kExh, Variant::kExa,
                                           Variant::kBrf, Variant::kBvf,
                                           Variant::kBrc, Variant::kReg};

/// Lower-case flag name: exh, exa, brf, bvf, brc, reg.
std::string_view to_string(Variant v);
/// Case-insensitive inverse of to_string. Throws DomainError.
Variant parse_variant(std::string_view name);

struct EnsembleSpec {
  Variant variant = Variant::kExh;
  LocalitySpec locality;
  ObservableMode observable_mode = ObservableMode::kRandomised;
  std::uint64_t seed = 0;
  /// Replaces the locality degree of the graph variants (diagnostics).
  std::optional<std::size_t> degree;
};

/// Entry distribution of the graph ensembles: real diagonal entries with
/// standard deviation sigma_diag(L) = diag_slope * L + diag_intercept and
/// off-diagonal entries whose real and imaginary parts are independent
/// normals with standard deviation sigma_off.
struct WeightModel {
  double diag_slope = 0.0;
  double diag_intercept = 1.0;
  double sigma_off = 1.0;
  bool complex_off = true;

  double sigma_diag(int sites) const;
};

/// Raw (unnormalised) EXH entry statistics per chain length.
struct WeightStatistics {
  int bodies = 1;
  int diameter = 1;
  std::vector<int> sizes;
  std::vector<double> sigma_diag;
  /// Pooled over real and imaginary parts of the upper off-diagonal entries.
  std::vector<double> sigma_off;
  std::size_t samples_per_size = 0;
};

WeightStatistics measure_weight_statistics(int bodies, int diameter,
                                           std::span<const int> sizes,
                                           std::size_t samples_per_size,
                                           std::uint64_t seed);

/// Affine fit of sigma_diag in L; sigma_off is the mean over sizes.
/// `diag_fit` receives the fit diagnostics when non-null.
WeightModel fit_weight_model(const WeightStatistics& stats,
                             LinearFit* diag_fit = nullptr);

/// Disorder-averaged ||H|| (affine in L) and delta_o (exp(a L^b)) fits.
struct ScalingFits {
  Variant variant = Variant::kExh;
  std::vector<int> sizes;
  std::vector<double> mean_norm;
  std::vector<double> mean_delta_o;
  LinearFit norm_fit;
  PowerExpFit delta_o_fit;

  bool empty() const { return sizes.empty(); }
  double norm_at(int sites) const { return norm_fit(sites); }
  double delta_o_at(int sites) const { return delta_o_fit(sites); }
};

/// Fits from `samples_per_size` draws of `variant` at each size. Only the
/// locality's bodies and diameter are used; the chain lengths come from
/// `sizes` (>= 4 distinct values). Graph variants need `weights`.
ScalingFits fit_scalings(const LocalitySpec& locality, std::span<const int> sizes,
                         std::size_t samples_per_size, std::uint64_t seed,
                         Variant variant = Variant::kExh,
                         const WeightModel* weights = nullptr,
                         ObservableMode mode = ObservableMode::kRandomised);

struct RetryCaps {
  /// Reshuffles allowed while resolving one conflict.
  int shuffle_cap = 100;
  /// Whole-matrix attempts before giving up.
  int restart_cap = 50;
};

struct ConstructionStats {
  int attempts = 0;
  int shuffles = 0;
};

/// Random graph in which every node has degree exactly rho and every edge
/// (j, k) lies in the band windows of both j and k. Rows are completed top
/// to bottom, rows whose free slots just suffice are completed first, and
/// rows that can no longer be completed trigger random re-draws of the
/// earlier rows blocking them. Throws InfeasibleError when some window is
/// too small or the restart cap is exhausted.
AdjacencyGraph build_banded_regular(std::size_t dim, std::size_t rho,
                                    const BandwidthProfile& band,
                                    std::uint64_t seed,
                                    const RetryCaps& caps = {},
                                    ConstructionStats* stats = nullptr);

/// Same row-by-row construction without conflict resolution: rows short of
/// free slots take excess edges to completed rows, then random edges are
/// dropped until the edge count is dim * rho_avg / 2.
AdjacencyGraph build_banded_variable(std::size_t dim, std::size_t rho_avg,
                                     const BandwidthProfile& band,
                                     std::uint64_t seed);

/// build_banded_regular with the constant band |k - j| <= bmax.
AdjacencyGraph build_banded_constant(std::size_t dim, std::size_t rho,
                                     std::size_t bmax, std::uint64_t seed,
                                     const RetryCaps& caps = {},
                                     ConstructionStats* stats = nullptr);

struct RegularOptions {
  /// Pairing-model attempts before giving up (exact uniform sampling).
  int pairing_cap = 100000;
  /// Degrees above this use the fallback: a greedy stub matching followed by
  /// switches_per_edge * E random double-edge swaps.
  std::size_t pairing_max_degree = 5;
  std::size_t switches_per_edge = 20;
};

/// Random simple rho-regular graph on dim nodes. Throws DomainError when
/// dim * rho is odd or rho >= dim, InfeasibleError when the cap runs out.
AdjacencyGraph build_regular(std::size_t dim, std::size_t rho, std::uint64_t seed,
                             const RegularOptions& options = {});

/// Raw weights on a graph: every node gets a real normal(0, sigma_diag(L))
/// diagonal entry and every edge j < k an entry normal(0, sigma_off) +
/// i normal(0, sigma_off). Entries are not normalised.
SparseHermitian assign_weights(const AdjacencyGraph& g, const WeightModel& model,
                               int sites, std::uint64_t seed);

/// Functional band used by the banded ensembles: the windows of
/// functional_bandwidth at radius flip_radius(spec, obs).
BandwidthProfile ensemble_band(const LocalitySpec& spec,
                               const DiagonalObservable& obs);

/// Largest dimension normalised with an exact spectral norm; larger samples
/// use ScalingFits::norm_fit.
inline constexpr std::size_t kExactNormMaxDim = std::size_t{1} << 12;

struct EnsembleSample {
  SparseHermitian hamiltonian;
  DiagonalObservable observable;
  /// Norm divided out of the raw sample.
  double raw_norm = 1.0;
  bool norm_extrapolated = false;
  ConstructionStats construction;
};

/// Draws one normalised sample. `fits` is required only above
/// kExactNormMaxDim. Throws InfeasibleError when the variant cannot be
/// built for the locality.
EnsembleSample draw(const EnsembleSpec& spec, const WeightModel& weights,
                    const ScalingFits* fits = nullptr);

inline SparseHermitian sample(const EnsembleSpec& spec, const WeightModel& weights,
                              const ScalingFits& fits) {
  return draw(spec, weights, fits.empty() ? nullptr : &fits).hamiltonian;
}

/// Unnormalised adjacency structure of a variant, for analysis and counting.
AdjacencyGraph variant_graph(const EnsembleSpec& spec,
                             const DiagonalObservable& obs,
                             ConstructionStats* stats = nullptr);

/// Weight model plus scaling fits of one (n, d, variant).
struct Calibration {
  int bodies = 1;
  int diameter = 1;
  Variant variant = Variant::kExh;
  std::uint64_t seed = 0;
  WeightStatistics statistics;
  WeightModel weights;
  LinearFit diag_fit;
  ScalingFits fits;
};

struct CalibrationOptions {
  std::vector<int> sizes;  // empty: default_calibration_sizes
  std::size_t samples_per_size = 100;
  std::uint64_t seed = 1;
};

/// Four or more chain lengths starting at the smallest valid one, up to 10.
std::vector<int> default_calibration_sizes(int bodies, int diameter);

Calibration calibrate(int bodies, int diameter, Variant variant,
                      const CalibrationOptions& options = {});

std::string calibration_to_json(const Calibration& c);
Calibration calibration_from_json(std::string_view text);

/// Loads the calibration for (n, d, variant) from `dir`, computing and
/// storing it under an exclusive lock when absent or computed with
/// different options.
Calibration cached_calibration(const std::filesystem::path& dir, int bodies,
                               int diameter, Variant variant,
                               const CalibrationOptions& options = {});

}  // namespace loceq
