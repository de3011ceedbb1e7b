#include "dls/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <spdlog/spdlog.h>

#include "dls/error.hpp"

namespace dls {

namespace {

const Field* first_component(const VelocityView& s) { return s.u ? s.u : (s.v ? s.v : s.w); }

Dims checked_dims(const VelocityView& s) {
  const Field* ref = first_component(s);
  if (!ref) throw Error(Errc::InvalidArgument, "snapshot has no velocity components");
  for (const Field* f : {s.u, s.v, s.w})
    if (f && f->dims != ref->dims)
      throw Error(Errc::DimensionMismatch, "velocity components disagree on dims: " + to_string(f->dims) + " vs " +
                                               to_string(ref->dims));
  return ref->dims;
}

}  // namespace

double kinetic_energy(const VelocityView& s) {
  const Dims dims = checked_dims(s);
  if (!s.u || !s.v || !s.w) spdlog::warn("kinetic energy: missing velocity components are treated as zero");
  double sum = 0.0;
  for (const Field* f : {s.u, s.v, s.w}) {
    if (!f) continue;
    for (double x : f->data) sum += x * x;
  }
  return sum / (2.0 * static_cast<double>(dims.count()));
}

std::vector<double> turbulent_kinetic_energy(std::span<const VelocityView> series) {
  if (series.size() < 2) throw Error(Errc::InvalidArgument, "turbulent kinetic energy needs at least 2 snapshots");
  const Dims dims = checked_dims(series.front());
  const std::size_t K = dims.count();
  const double T = static_cast<double>(series.size());

  // Per-component temporal means, then KE of the fluctuations.
  std::array<std::vector<double>, 3> mean;
  std::array<bool, 3> present{};
  auto component = [](const VelocityView& s, int c) { return c == 0 ? s.u : (c == 1 ? s.v : s.w); };
  for (int c = 0; c < 3; ++c) {
    present[c] = component(series.front(), c) != nullptr;
    if (!present[c]) continue;
    mean[c].assign(K, 0.0);
    for (const VelocityView& s : series) {
      const Field* f = component(s, c);
      if (!f || f->dims != dims) throw Error(Errc::DimensionMismatch, "series snapshots disagree on components or dims");
      for (std::size_t i = 0; i < K; ++i) mean[c][i] += f->data[i];
    }
    for (double& m : mean[c]) m /= T;
  }

  std::vector<double> tke;
  tke.reserve(series.size());
  for (const VelocityView& s : series) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      if (!present[c]) continue;
      const Field* f = component(s, c);
      for (std::size_t i = 0; i < K; ++i) {
        const double d = f->data[i] - mean[c][i];
        sum += d * d;
      }
    }
    tke.push_back(sum / (2.0 * static_cast<double>(K)));
  }
  return tke;
}

std::vector<PsdPoint> probe_psd(std::span<const double> values, double dt, Window window) {
  const std::size_t T = values.size();
  if (T < 4) throw Error(Errc::InvalidArgument, "PSD needs at least 4 samples");
  if (!(dt > 0.0)) throw Error(Errc::InvalidArgument, "sample spacing must be > 0");

  std::vector<double> w(T, 1.0);
  if (window == Window::Hann)
    for (std::size_t n = 0; n < T; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(T));
  double power_norm = 0.0;
  for (double x : w) power_norm += x * x;
  power_norm /= static_cast<double>(T);

  const double fs = 1.0 / dt;
  const double scale = 1.0 / (static_cast<double>(T) * fs * power_norm);
  std::vector<PsdPoint> psd;
  psd.reserve(T / 2 + 1);
  for (std::size_t k = 0; k <= T / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t n = 0; n < T; ++n) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * n % T) / static_cast<double>(T);
      acc += w[n] * values[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    const bool edge = k == 0 || (T % 2 == 0 && k == T / 2);
    psd.push_back({static_cast<double>(k) / (static_cast<double>(T) * dt), (edge ? 1.0 : 2.0) * scale * std::norm(acc)});
  }
  return psd;
}

std::size_t dominant_bin(std::span<const PsdPoint> psd) {
  std::size_t best = psd.size() > 1 ? 1 : 0;
  for (std::size_t k = 1; k < psd.size(); ++k)
    if (psd[k].power > psd[best].power) best = k;
  return best;
}

std::vector<double> probe_series(std::span<const Field> series, const Probe& p) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const Field& f : series) {
    if (p.i >= f.dims.nx || p.j >= f.dims.ny || p.k >= f.dims.nz)
      throw Error(Errc::OutOfRange, "probe (" + std::to_string(p.i) + "," + std::to_string(p.j) + "," +
                                        std::to_string(p.k) + ") outside " + to_string(f.dims));
    out.push_back(f.at(p.i, p.j, p.k));
  }
  return out;
}

SeriesStats compute_series_stats(std::span<const VelocityView> series, std::span<const Probe> probes) {
  SeriesStats st;
  st.ke.reserve(series.size());
  for (const VelocityView& s : series) st.ke.push_back(kinetic_energy(s));
  st.tke = series.size() >= 2 ? turbulent_kinetic_energy(series) : std::vector<double>(series.size(), 0.0);
  st.probes.assign(probes.begin(), probes.end());
  for (const Probe& p : probes) {
    std::vector<double> values;
    values.reserve(series.size());
    for (const VelocityView& s : series) {
      const Field* f = first_component(s);
      if (p.i >= f->dims.nx || p.j >= f->dims.ny || p.k >= f->dims.nz)
        throw Error(Errc::OutOfRange, "probe (" + std::to_string(p.i) + "," + std::to_string(p.j) + "," +
                                          std::to_string(p.k) + ") outside " + to_string(f->dims));
      values.push_back(f->at(p.i, p.j, p.k));
    }
    st.probe_values.push_back(std::move(values));
  }
  return st;
}

double recovery_pct(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "series lengths differ");
  double diff = 0.0, total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    diff += a[t] - b[t];
    total += a[t];
  }
  if (total == 0.0) return diff == 0.0 ? 100.0 : 0.0;
  return 100.0 * (1.0 - std::abs(diff) / total);
}

bool SeriesComparison::all_frequencies_match() const {
  return std::all_of(frequency_match.begin(), frequency_match.end(), [](bool b) { return b; });
}

SeriesComparison compare_series(const SeriesStats& a, const SeriesStats& b, double dt, Window window) {
  if (a.ke.size() != b.ke.size() || a.tke.size() != b.tke.size() || a.probe_values.size() != b.probe_values.size())
    throw Error(Errc::DimensionMismatch, "series statistics differ in length or probe count");
  SeriesComparison c;
  c.ke_recovery_pct = recovery_pct(a.ke, b.ke);
  c.tke_recovery_pct = recovery_pct(a.tke, b.tke);
  for (std::size_t p = 0; p < a.probe_values.size(); ++p) {
    const std::size_t da = dominant_bin(probe_psd(a.probe_values[p], dt, window));
    const std::size_t db = dominant_bin(probe_psd(b.probe_values[p], dt, window));
    c.dominant_original.push_back(da);
    c.dominant_reconstructed.push_back(db);
    c.frequency_match.push_back(da == db);
  }
  return c;
}

}  // namespace dls
