#pragma once

// Real-space export of a coefficient set.
//
// The Fourier transform is synthesized on an N^3 Cartesian frequency grid by
// evaluating the harmonic expansion at each direction and interpolating
// linearly between shells; frequencies beyond the last shell are zero. The
// axis Nyquist frequency equals the last shell, which fixes the voxel size
// to pi / k_max. An inverse DFT (FFTW) then gives the density at
//   r = (p - N/2) * voxel_size,  p = 0..N-1 per axis,
// stored x-fastest as little-endian float32.

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "kamor/errors.hpp"
#include "kamor/harmonics.hpp"
#include "kamor/io.hpp"
#include "kamor/kam.hpp"

namespace kamor {

inline constexpr const char* kVolumeSchema = "kamor.volume/1";

struct Volume {
  int N = 0;
  double voxel_size = 0.0;
  std::vector<float> data;  // index (z * N + y) * N + x

  double coordinate(int p) const { return (p - N / 2) * voxel_size; }
  float at(int x, int y, int z) const {
    return data[(static_cast<std::size_t>(z) * N + y) * N + x];
  }
};

/// Fourier transform value at frequency vector k from the expansion.
class FourierSynthesizer {
 public:
  explicit FourierSynthesizer(const CoefficientSet& set) : set_(set) {
    set_.validate();
    for (int j = 0; j < set_.K(); ++j) shells_.push_back(set_.shell(j));
  }

  complex operator()(double kx, double ky, double kz) const {
    const auto& ks = set_.grid.ks;
    const double k = std::sqrt(kx * kx + ky * ky + kz * kz);
    if (k > ks.back()) return {};
    const Direction dir = direction_of(kx, ky, kz);
    const auto y = eval_real_sh_all(set_.L, dir.theta, dir.phi);
    const auto shell_value = [&](int j) {
      complex acc{};
      for (std::size_t i = 0; i < y.size(); ++i) acc += shells_[j].values[i] * y[i];
      return acc;
    };
    if (k <= ks.front()) return shell_value(0);
    const auto hi = static_cast<int>(std::upper_bound(ks.begin(), ks.end(), k) - ks.begin());
    const int j1 = std::min(hi, set_.K() - 1);
    const int j0 = j1 - 1;
    const double t = (k - ks[j0]) / (ks[j1] - ks[j0]);
    return (1.0 - t) * shell_value(j0) + t * shell_value(j1);
  }

 private:
  CoefficientSet set_;
  std::vector<ShellCoefficients> shells_;
};

inline Volume export_volume(const CoefficientSet& set, int N) {
  if (N < 2 || N % 2 != 0) throw InputError("export_volume: N must be even and >= 2");
  const double k_max = set.grid.ks.back();
  if (!(k_max > 0.0)) throw InputError("export_volume: last shell must be positive");
  const FourierSynthesizer synth(set);

  const double voxel = std::numbers::pi / k_max;
  const double dk = 2.0 * k_max / N;
  const std::size_t total = static_cast<std::size_t>(N) * N * N;

  using FftwBuffer = std::unique_ptr<fftw_complex[], decltype(&fftw_free)>;
  FftwBuffer buf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total)),
                 &fftw_free);
  if (!buf) throw std::bad_alloc();

  // (-1)^(i) factors move the zero frequency and the origin to index N/2
  for (int iz = 0; iz < N; ++iz)
    for (int iy = 0; iy < N; ++iy)
      for (int ix = 0; ix < N; ++ix) {
        const complex v = synth((ix - N / 2) * dk, (iy - N / 2) * dk, (iz - N / 2) * dk);
        const double sign = ((ix + iy + iz) % 2 == 0) ? 1.0 : -1.0;
        const std::size_t idx = (static_cast<std::size_t>(iz) * N + iy) * N + ix;
        buf[idx][0] = sign * v.real();
        buf[idx][1] = sign * v.imag();
      }

  fftw_plan plan = fftw_plan_dft_3d(N, N, N, buf.get(), buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  const double box = N * voxel;
  const double norm = 1.0 / (box * box * box);
  const double global = ((3 * (N / 2)) % 2 == 0) ? 1.0 : -1.0;
  Volume vol{N, voxel, std::vector<float>(total)};
  for (int pz = 0; pz < N; ++pz)
    for (int py = 0; py < N; ++py)
      for (int px = 0; px < N; ++px) {
        const std::size_t idx = (static_cast<std::size_t>(pz) * N + py) * N + px;
        const double sign = ((px + py + pz) % 2 == 0) ? global : -global;
        vol.data[idx] = static_cast<float>(sign * norm * buf[idx][0]);
      }
  return vol;
}

inline json volume_sidecar(const Volume& v, const std::string& data_file) {
  const double origin = v.coordinate(0);
  return {{"schema", kVolumeSchema},
          {"file", data_file},
          {"dtype", "float32-le"},
          {"shape", {v.N, v.N, v.N}},
          {"order", "x-fastest"},
          {"voxel_size", v.voxel_size},
          {"origin", {origin, origin, origin}}};
}

/// Writes `path` (raw float32) and `path`.json (sidecar).
inline void save_volume(const Volume& v, const fs::path& path) {
  std::string bytes;
  bytes.reserve(v.data.size() * 4);
  for (float f : v.data) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  const fs::path target = fs::absolute(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".partial");
  detail::write_file(tmp, bytes);
  fs::rename(tmp, target);
  write_text_atomic(fs::path(target.string() + ".json"),
                    volume_sidecar(v, target.filename().string()).dump(2) + "\n");
}

}  // namespace kamor
