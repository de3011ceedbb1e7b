#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dls/field.hpp"

namespace dls {

// One snapshot's velocity components; a null component counts as zero.
struct VelocityView {
  const Field* u = nullptr;
  const Field* v = nullptr;
  const Field* w = nullptr;
};

// E = 1/(2K) * sum(u^2 + v^2 + w^2)
double kinetic_energy(const VelocityView& snapshot);

// Kinetic energy of the fluctuations about the per-point temporal mean.
std::vector<double> turbulent_kinetic_energy(std::span<const VelocityView> series);

enum class Window { None, Hann };

struct PsdPoint {
  double frequency = 0.0;
  double power = 0.0;
};

// One-sided periodogram of a uniformly sampled series, bins 0..floor(T/2).
// Interior bins carry the factor 2; DC and (even T) Nyquist do not. With no
// window, sum(P) * df equals the mean square of the series.
std::vector<PsdPoint> probe_psd(std::span<const double> values, double dt, Window window = Window::None);

// Index of the strongest non-DC bin.
std::size_t dominant_bin(std::span<const PsdPoint> psd);

struct Probe {
  std::size_t i = 0, j = 0, k = 0;
};

std::vector<double> probe_series(std::span<const Field> series, const Probe& probe);

struct SeriesStats {
  std::vector<double> ke;
  std::vector<double> tke;
  std::vector<Probe> probes;
  std::vector<std::vector<double>> probe_values;  // one time series per probe
};

// Probes sample the first available component of each snapshot.
SeriesStats compute_series_stats(std::span<const VelocityView> series, std::span<const Probe> probes);

// 100 * (1 - |sum(a - b)| / sum(a))
double recovery_pct(std::span<const double> original, std::span<const double> reconstructed);

struct SeriesComparison {
  double ke_recovery_pct = 0.0;
  double tke_recovery_pct = 0.0;
  std::vector<std::size_t> dominant_original;
  std::vector<std::size_t> dominant_reconstructed;
  std::vector<bool> frequency_match;

  bool all_frequencies_match() const;
};

SeriesComparison compare_series(const SeriesStats& original, const SeriesStats& reconstructed, double dt,
                                Window window = Window::None);

}  // namespace dls
