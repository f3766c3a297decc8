#pragma once

// Differencing, zero-phase Butterworth filtering and resampling of uniformly
// sampled multichannel series (rows = frames, columns = channels).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gaitdyn/common.hpp"

namespace gaitdyn {

/// Default low-pass settings applied to kinematic and force data.
inline constexpr double kStandardCutoffHz = 30.0;
inline constexpr int kStandardFilterOrder = 3;
inline constexpr double kStandardRateHz = 100.0;

struct TimeSeries {
  double dt = 0.01;
  MatX samples;  // T x D

  int frames() const { return static_cast<int>(samples.rows()); }
  int channels() const { return static_cast<int>(samples.cols()); }
};

inline void check_series(const TimeSeries& s) {
  require(s.dt > 0.0 && std::isfinite(s.dt), "series dt must be positive");
  require(s.frames() >= 1, "series must hold at least one frame");
  require(s.samples.allFinite(), "series values must be finite");
}

/// (x[t-1] - 2x[t] + x[t+1]) / dt^2; the two end frames copy their neighbour.
inline TimeSeries central_difference2(const TimeSeries& s) {
  check_series(s);
  const int n = s.frames();
  require(n >= 3, "central differencing needs at least 3 frames");
  TimeSeries out{s.dt, MatX(n, s.channels())};
  const double inv = 1.0 / (s.dt * s.dt);
  for (int t = 1; t + 1 < n; ++t)
    out.samples.row(t) =
        (s.samples.row(t - 1) - 2.0 * s.samples.row(t) + s.samples.row(t + 1)) * inv;
  out.samples.row(0) = out.samples.row(1);
  out.samples.row(n - 1) = out.samples.row(n - 2);
  return out;
}

/// (x[t+1] - x[t-1]) / 2dt with the same end-frame policy.
inline TimeSeries central_difference1(const TimeSeries& s) {
  check_series(s);
  const int n = s.frames();
  require(n >= 3, "central differencing needs at least 3 frames");
  TimeSeries out{s.dt, MatX(n, s.channels())};
  for (int t = 1; t + 1 < n; ++t)
    out.samples.row(t) = (s.samples.row(t + 1) - s.samples.row(t - 1)) / (2.0 * s.dt);
  out.samples.row(0) = out.samples.row(1);
  out.samples.row(n - 1) = out.samples.row(n - 2);
  return out;
}

/// Direct-form-II-transposed section, normalized to unit DC gain. First-order
/// sections carry b2 = a2 = 0.
struct BiquadSection {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

/// Digital Butterworth low-pass by bilinear transform with the cutoff
/// prewarped, factored into cascaded sections.
inline std::vector<BiquadSection> butterworth_sections(int order, double cutoff_hz,
                                                       double sample_hz) {
  require(order >= 1 && order <= 6, "filter order must be in 1..6");
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_hz,
          "cutoff must lie strictly between 0 and the Nyquist frequency");
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_hz);
  std::vector<BiquadSection> out;
  for (int i = 0; i < order / 2; ++i) {
    // damping of the i-th conjugate pole pair of the analog prototype
    const double d =
        2.0 * std::sin(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order));
    const double norm = 1.0 / (1.0 + d * k + k * k);
    BiquadSection s;
    s.b0 = k * k * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k * k - 1.0) * norm;
    s.a2 = (1.0 - d * k + k * k) * norm;
    out.push_back(s);
  }
  if (order % 2 == 1) {
    BiquadSection s;
    s.b0 = k / (1.0 + k);
    s.b1 = s.b0;
    s.a1 = (k - 1.0) / (k + 1.0);
    out.push_back(s);
  }
  return out;
}

namespace detail {

/// Runs the cascade over x in place, starting every section in the steady
/// state of a constant input equal to x[0].
inline void run_sections(const std::vector<BiquadSection>& sections,
                         std::vector<double>& x) {
  for (const auto& s : sections) {
    const double x0 = x.front();
    double z1 = (1.0 - s.b0) * x0;
    double z2 = (s.b2 - s.a2) * x0;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

}  // namespace detail

/// Zero-phase low-pass: forward then backward pass of the Butterworth
/// cascade over an odd reflection of 3*order samples at each end. The double
/// pass squares the magnitude response (-6 dB at the cutoff). The straight
/// line through the two end samples is removed before filtering and added
/// back afterwards, so ramps pass through untouched.
inline TimeSeries butterworth_lowpass(const TimeSeries& s, double cutoff_hz,
                                      int order = kStandardFilterOrder) {
  check_series(s);
  const auto sections = butterworth_sections(order, cutoff_hz, 1.0 / s.dt);
  const int n = s.frames();
  TimeSeries out{s.dt, MatX(n, s.channels())};
  if (n == 1) {
    out.samples = s.samples;
    return out;
  }
  const int pad = std::min(3 * order, n - 1);
  std::vector<double> buf(static_cast<std::size_t>(n + 2 * pad));
  for (int c = 0; c < s.channels(); ++c) {
    // least-squares line, removed before filtering and restored after
    const double tbar = 0.5 * (n - 1);
    const double mean = s.samples.col(c).mean();
    double sxy = 0.0, sxx = 0.0;
    for (int t = 0; t < n; ++t) {
      sxy += (t - tbar) * (s.samples(t, c) - mean);
      sxx += (t - tbar) * (t - tbar);
    }
    const double slope = sxy / sxx;
    const double first = mean - slope * tbar;
    VecX col(n);
    for (int t = 0; t < n; ++t) col[t] = s.samples(t, c) - (first + slope * t);
    for (int i = 0; i < pad; ++i) {
      buf[i] = 2.0 * col[0] - col[pad - i];
      buf[pad + n + i] = 2.0 * col[n - 1] - col[n - 2 - i];
    }
    for (int t = 0; t < n; ++t) buf[pad + t] = col[t];
    detail::run_sections(sections, buf);
    std::reverse(buf.begin(), buf.end());
    detail::run_sections(sections, buf);
    std::reverse(buf.begin(), buf.end());
    for (int t = 0; t < n; ++t) out.samples(t, c) = buf[pad + t] + first + slope * t;
  }
  return out;
}

/// Linear interpolation onto a uniform grid at `target_hz` starting at the
/// first sample and spanning the original duration.
inline TimeSeries resample(const TimeSeries& s, double target_hz) {
  check_series(s);
  require(target_hz > 0.0 && std::isfinite(target_hz), "target rate must be positive");
  const double new_dt = 1.0 / target_hz;
  const int n = s.frames();
  const double duration = (n - 1) * s.dt;
  const int m = static_cast<int>(std::floor(duration / new_dt + 1e-9)) + 1;
  TimeSeries out{new_dt, MatX(m, s.channels())};
  for (int k = 0; k < m; ++k) {
    const double pos = k * new_dt / s.dt;
    int i = static_cast<int>(std::floor(pos + 1e-12));
    if (i >= n - 1) {
      out.samples.row(k) = s.samples.row(n - 1);
      continue;
    }
    const double frac = std::max(0.0, pos - i);
    if (frac < 1e-12) {
      out.samples.row(k) = s.samples.row(i);
    } else {
      out.samples.row(k) = (1.0 - frac) * s.samples.row(i) + frac * s.samples.row(i + 1);
    }
  }
  return out;
}

}  // namespace gaitdyn
