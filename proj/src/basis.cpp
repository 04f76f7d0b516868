#include "specvol/basis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "specvol/errors.hpp"

namespace specvol {

namespace {

constexpr double kPi = std::numbers::pi;

void check_bin(int k, const BinGrid& grid) {
  if (k < 1 || k > grid.n_bins())
    throw ArgumentError("bin index " + std::to_string(k) + " outside 1.." +
                        std::to_string(grid.n_bins()));
}

void check_frequency(int j) {
  if (j < 1) throw ArgumentError("frequency must be >= 1");
}

// FFTW plans for the sine transforms of a given kind and length. The
// planner is not thread-safe, execution with fftw_execute_r2r on fresh
// aligned buffers is.
class DstPlanCache {
 public:
  static DstPlanCache& instance() {
    static DstPlanCache cache;
    return cache;
  }

  fftw_plan plan(int length, fftw_r2r_kind kind) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_pair(length, static_cast<int>(kind));
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(length);
    double* out = fftw_alloc_real(length);
    fftw_plan p = fftw_plan_r2r_1d(length, in, out, kind, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, p);
    return p;
  }

  ~DstPlanCache() {
    for (auto& [key, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

struct FftwBuffer {
  explicit FftwBuffer(int n) : data(fftw_alloc_real(static_cast<std::size_t>(std::max(n, 1)))) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* data;
};

void set_unit_gain(SpectralArray& out) {
  const int d = out.dimension();
  for (int k = 1; k <= out.grid().n_bins(); ++k)
    for (int j = 1; j <= out.j_max(); ++j)
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) out.gain(k, j, p, q) = 1.0;
}

// Aligned regular grid: bin k holds increments i = (k-1)m+r, r = 1..m-1 with
// nonzero basis value sqrt(2/h) sin(j pi r / m); RODFT00 returns
// 2 sum_r x_r sin(pi j r / m).
void fill_regular_dst(const ComponentObservations& c, int p, SpectralArray& out) {
  const BinGrid& grid = out.grid();
  const int m = static_cast<int>(grid.obs_per_bin());
  const int length = m - 1;
  const double scale = 0.5 * std::sqrt(2.0 / grid.width());
  const std::size_t n = c.n();
  fftw_plan plan = DstPlanCache::instance().plan(length, FFTW_RODFT00);
  FftwBuffer in(length), res(length);
  for (int k = 1; k <= grid.n_bins(); ++k) {
    const std::size_t base = static_cast<std::size_t>(k - 1) * m;
    for (int r = 1; r <= length; ++r) {
      const std::size_t i = base + r;
      in.data[r - 1] = c.values[i] - c.values[i - 1];
    }
    fftw_execute_r2r(plan, in.data, res.data);
    for (int j = 1; j <= out.j_max(); ++j) {
      out(k, j, p) = scale * res.data[j - 1];
      out.noise_energy(k, j, p) = discrete_weight_norm(j, n, grid) / static_cast<double>(n);
    }
  }
}

// Number of increments per bin when every component is observed at
// t_i = i h / m with the same m, so that midpoints align with the bins;
// 0 otherwise.
int aligned_midpoints_per_bin(const ObservationSet& obs, const BinGrid& grid) {
  const std::size_t n = obs[0].n();
  const double nh = static_cast<double>(n) * grid.width();
  const int m = static_cast<int>(std::lround(nh));
  if (m < 2 || std::abs(nh - m) > 1e-9 * nh) return 0;
  if (static_cast<std::size_t>(m) * grid.n_bins() != n) return 0;
  const double step = grid.width() / m;
  for (int p = 0; p < obs.dimension(); ++p) {
    const auto& t = obs[p].times;
    if (obs[p].n() != n) return 0;
    for (std::size_t i = 0; i <= n; ++i)
      if (std::abs(t[i] - static_cast<double>(i) * step) > 1e-9 * step) return 0;
  }
  return m;
}

// Midpoints (r - 1/2) h / m, r = 1..m; RODFT10 returns
// 2 sum_r x_r sin(pi j (r - 1/2) / m) at index j - 1. The noise energy
// telescopes to (2/h) sin^2(j pi / 2m) (2m + 2C), C = sum_{s<m} cos(2 pi j s / m).
void fill_regular_midpoint(const ComponentObservations& c, int p, int m, SpectralArray& out) {
  const BinGrid& grid = out.grid();
  const double h = grid.width();
  const double scale = 0.5 * std::sqrt(2.0 / h);
  fftw_plan plan = DstPlanCache::instance().plan(m, FFTW_RODFT10);
  FftwBuffer in(m), res(m);
  std::vector<double> energy(out.j_max());
  for (int j = 1; j <= out.j_max(); ++j) {
    const double s = std::sin(j * kPi / (2.0 * m));
    const double cs = j % m == 0 ? m - 1.0 : -1.0;
    energy[j - 1] = (2.0 / h) * s * s * (2.0 * m + 2.0 * cs);
  }
  for (int k = 1; k <= grid.n_bins(); ++k) {
    const std::size_t base = static_cast<std::size_t>(k - 1) * m;
    for (int r = 0; r < m; ++r) in.data[r] = c.values[base + r + 1] - c.values[base + r];
    fftw_execute_r2r(plan, in.data, res.data);
    for (int j = 1; j <= out.j_max(); ++j) {
      out(k, j, p) = scale * res.data[j - 1];
      out.noise_energy(k, j, p) = energy[j - 1];
    }
  }
}

// Per-bin state of one component in the direct route.
struct BinRows {
  std::size_t begin = 0;
  std::size_t count = 0;
  std::vector<double> a, len, theta, re, im, cr, sr;
};

// General route. Increment i of component p spans [t_i, t_{i+1}] and is
// evaluated at points[p][i]; bins take increments by half-open attribution.
// The values sin(j theta_u) come from a complex rotation recurrence
// re-seeded every kReseed steps. All components advance together in j so
// that the cross gains use the current rows only.
void fill_direct(const ObservationSet& obs, const std::vector<std::vector<double>>& points,
                 SpectralArray& out) {
  constexpr int kReseed = 48;
  const BinGrid& grid = out.grid();
  const double h = grid.width();
  const double amp2 = 2.0 / h;
  const double amp = std::sqrt(amp2);
  const int J = out.j_max();
  const int d = obs.dimension();
  const int n_bins = grid.n_bins();

  // first[p][k - 1] .. first[p][k] is the increment range of bin k
  std::vector<std::vector<std::size_t>> first(d, std::vector<std::size_t>(n_bins + 1));
  for (int p = 0; p < d; ++p) {
    const auto& x = points[p];
    std::size_t i = 0;
    while (i < x.size() && !(x[i] >= 0.0)) ++i;
    for (int k = 1; k <= n_bins; ++k) {
      first[p][k - 1] = i;
      while (i < x.size() && grid.bin_of(x[i]) == k) ++i;
    }
    first[p][n_bins] = i;
  }

  struct Pair {
    int p, q;
    std::vector<std::size_t> u, v;
    std::vector<double> len;
  };
  std::vector<BinRows> rows(d);
  std::vector<Pair> pairs;
  for (int p = 0; p < d; ++p)
    for (int q = p + 1; q < d; ++q) pairs.push_back(Pair{p, q, {}, {}, {}});

  for (int k = 1; k <= n_bins; ++k) {
    for (int p = 0; p < d; ++p) {
      const auto& c = obs[p];
      BinRows& r = rows[p];
      r.begin = first[p][k - 1];
      r.count = first[p][k] - r.begin;
      for (auto* v : {&r.a, &r.len, &r.theta, &r.re, &r.im, &r.cr, &r.sr}) v->resize(r.count);
      for (std::size_t u = 0; u < r.count; ++u) {
        const std::size_t i = r.begin + u;
        r.a[u] = c.values[i + 1] - c.values[i];
        r.len[u] = c.times[i + 1] - c.times[i];
        r.theta[u] = kPi * (points[p][i] - grid.left(k)) / h;
        r.cr[u] = std::cos(r.theta[u]);
        r.sr[u] = std::sin(r.theta[u]);
        r.re[u] = r.cr[u];
        r.im[u] = r.sr[u];
      }
    }
    for (Pair& pr : pairs) {
      pr.u.clear();
      pr.v.clear();
      pr.len.clear();
      const BinRows& rp = rows[pr.p];
      const BinRows& rq = rows[pr.q];
      const auto& tp = obs[pr.p].times;
      const auto& tq = obs[pr.q].times;
      std::size_t u = 0, v = 0;
      while (u < rp.count && v < rq.count) {
        const double hi_p = tp[rp.begin + u + 1], hi_q = tq[rq.begin + v + 1];
        const double overlap = std::min(hi_p, hi_q) - std::max(tp[rp.begin + u], tq[rq.begin + v]);
        if (overlap > 0.0) {
          pr.u.push_back(u);
          pr.v.push_back(v);
          pr.len.push_back(overlap);
        }
        if (hi_p < hi_q) ++u;
        else ++v;
      }
    }

    for (int j = 1; j <= J; ++j) {
      for (int p = 0; p < d; ++p) {
        BinRows& r = rows[p];
        const std::size_t count = r.count;
        if (count == 0) continue;
        if (j > 1) {
          if ((j - 1) % kReseed == 0) {
            for (std::size_t u = 0; u < count; ++u) {
              r.re[u] = std::cos(j * r.theta[u]);
              r.im[u] = std::sin(j * r.theta[u]);
            }
          } else {
            for (std::size_t u = 0; u < count; ++u) {
              const double r0 = r.re[u];
              r.re[u] = r0 * r.cr[u] - r.im[u] * r.sr[u];
              r.im[u] = r0 * r.sr[u] + r.im[u] * r.cr[u];
            }
          }
        }
        const double* im = r.im.data();
        double s = 0.0;
        double g = 0.0;
        double e = im[0] * im[0] + im[count - 1] * im[count - 1];
        for (std::size_t u = 0; u < count; ++u) {
          s += r.a[u] * im[u];
          g += r.len[u] * im[u] * im[u];
        }
        for (std::size_t u = 1; u < count; ++u) {
          const double diff = im[u] - im[u - 1];
          e += diff * diff;
        }
        out(k, j, p) = amp * s;
        out.noise_energy(k, j, p) = amp2 * e;
        out.gain(k, j, p, p) = amp2 * g;
      }
      for (const Pair& pr : pairs) {
        const double* ip = rows[pr.p].im.data();
        const double* iq = rows[pr.q].im.data();
        double g = 0.0;
        for (std::size_t s = 0; s < pr.len.size(); ++s) g += pr.len[s] * ip[pr.u[s]] * iq[pr.v[s]];
        out.gain(k, j, pr.p, pr.q) = amp2 * g;
        out.gain(k, j, pr.q, pr.p) = amp2 * g;
      }
    }
  }
}

}  // namespace

BinGrid BinGrid::unit(int n_bins) {
  if (n_bins < 1) throw ArgumentError("bin count must be >= 1");
  return BinGrid(n_bins, 1.0 / n_bins, 0, 0);
}

BinGrid BinGrid::regular(std::size_t n, int n_bins) {
  if (n_bins < 1) throw ArgumentError("bin count must be >= 1");
  const std::size_t per_bin = n / static_cast<std::size_t>(n_bins);
  if (per_bin < 2) throw ArgumentError("fewer than 2 observations per bin");
  return BinGrid(n_bins, static_cast<double>(per_bin) / static_cast<double>(n), n, per_bin);
}

int BinGrid::bin_of(double t) const {
  if (!(t >= 0.0)) return 0;
  const double scaled = t / width_;
  if (scaled >= n_bins_) return 0;
  int k = static_cast<int>(std::floor(scaled)) + 1;
  // guard against rounding at bin edges
  if (k > 1 && t < left(k)) --k;
  if (k < n_bins_ && t >= right(k)) ++k;
  return k;
}

FrequencyRange FrequencyRange::for_grid(const BinGrid& grid, std::size_t n, int cap) {
  std::size_t per_bin = grid.obs_per_bin();
  if (per_bin == 0) per_bin = static_cast<std::size_t>(std::floor(static_cast<double>(n) * grid.width()));
  if (per_bin < 2) throw ArgumentError("fewer than 2 observations per bin");
  int j_max = static_cast<int>(per_bin) - 1;
  if (cap > 0) j_max = std::min(j_max, cap);
  return FrequencyRange{j_max};
}

double sine_basis_value(int j, int k, const BinGrid& grid, double t) {
  check_frequency(j);
  check_bin(k, grid);
  const double h = grid.width();
  const double lo = grid.left(k);
  if (t < lo || t > grid.right(k)) return 0.0;
  return std::sqrt(2.0 / h) * std::sin(j * kPi * (t - lo) / h);
}

double weight_basis_value(int j, int k, const BinGrid& grid, std::size_t n, double t,
                          WeightBasisMode mode) {
  check_frequency(j);
  check_bin(k, grid);
  const double h = grid.width();
  const double lo = grid.left(k);
  if (mode == WeightBasisMode::discrete) {
    if (n == 0) throw ArgumentError("discrete weight basis requires n");
    const double nh = static_cast<double>(n) * h;
    if (j >= static_cast<int>(std::floor(nh + 1e-9)))
      throw ArgumentError("frequency j must be below floor(n h) in discrete mode");
  }
  if (t < lo || t > grid.right(k)) return 0.0;
  const double c = std::cos(j * kPi * (t - lo) / h);
  if (mode == WeightBasisMode::continuous) return std::sqrt(2.0 / h) * (j * kPi / h) * c;
  const double dn = static_cast<double>(n);
  return 2.0 * dn * std::sqrt(2.0 / h) * std::sin(j * kPi / (2.0 * dn * h)) * c;
}

double discrete_weight_norm(int j, std::size_t n, const BinGrid& grid) {
  const double dn = static_cast<double>(n);
  const double s = std::sin(j * kPi / (2.0 * dn * grid.width()));
  return 4.0 * dn * dn * s * s;
}

double continuous_weight_norm(int j, const BinGrid& grid) {
  const double h = grid.width();
  return kPi * kPi * j * j / (h * h);
}

double empirical_scalar_product(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("scalar product: length mismatch");
  if (a.empty()) throw ArgumentError("scalar product: empty sequences");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum / static_cast<double>(a.size());
}

double empirical_scalar_product(const std::function<double(double)>& f,
                                const std::function<double(double)>& g, std::size_t n,
                                ScalarProductVariant variant) {
  if (n == 0) throw ArgumentError("scalar product: n must be positive");
  const double shift = variant == ScalarProductVariant::shifted ? 0.5 : 0.0;
  const double dn = static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = (static_cast<double>(i) - shift) / dn;
    sum += f(t) * g(t);
  }
  return sum / dn;
}

SpectralArray::SpectralArray(BinGrid grid, FrequencyRange freq, int d)
    : grid_(grid), freq_(freq), d_(d) {
  if (d < 1) throw ArgumentError("dimension must be >= 1");
  if (freq.j_max < 1) throw ArgumentError("j_max must be >= 1");
  const std::size_t size = static_cast<std::size_t>(grid.n_bins()) * freq.j_max * d;
  values_.assign(size, 0.0);
  energy_.assign(size, 0.0);
  gain_.assign(size * d, 0.0);
  increments_.assign(d, 0);
}

SpectralArray spectral_statistics(const ObservationSet& obs, const BinGrid& grid,
                                  const FrequencyRange& freq, EvaluationPoint point) {
  obs.validate();
  if (point == EvaluationPoint::automatic) {
    point = (obs.dimension() == 1 && obs[0].is_equidistant()) ? EvaluationPoint::grid_point
                                                               : EvaluationPoint::midpoint;
  }
  if (grid.obs_per_bin() > 0 && freq.j_max > static_cast<int>(grid.obs_per_bin()) - 1)
    throw ArgumentError("j_max exceeds floor(n h) - 1");

  SpectralArray out(grid, freq, obs.dimension());
  const int d = obs.dimension();
  for (int p = 0; p < d; ++p) out.increments()[p] = obs[p].n();

  if (point == EvaluationPoint::grid_point) {
    for (int p = 0; p < d; ++p)
      if (!obs[p].is_equidistant())
        throw ArgumentError("grid-point evaluation requires equidistant observations");
    if (d == 1 && grid.n() == obs[0].n()) {
      fill_regular_dst(obs[0], 0, out);
      set_unit_gain(out);
      return out;
    }
  } else if (const int m = aligned_midpoints_per_bin(obs, grid); m > 0) {
    for (int p = 0; p < d; ++p) fill_regular_midpoint(obs[p], p, m, out);
    set_unit_gain(out);
    return out;
  }

  std::vector<std::vector<double>> x(d);
  for (int p = 0; p < d; ++p) {
    const auto& c = obs[p];
    const std::size_t n = c.n();
    x[p].resize(n);
    for (std::size_t i = 1; i <= n; ++i) {
      x[p][i - 1] = point == EvaluationPoint::grid_point
                        ? static_cast<double>(i) / static_cast<double>(n)
                        : 0.5 * (c.times[i] + c.times[i - 1]);
    }
  }
  fill_direct(obs, x, out);
  return out;
}

}  // namespace specvol
