#pragma once

// Dense f64 compute kernels used by the tensor engine.
//
// Every kernel has a portable scalar reference implementation and, where the
// target supports it, an AVX2/FMA (x86-64) or NEON (aarch64) variant. The
// backend is chosen once at startup from CPU features; the GRAPHMLP_KERNELS
// environment variable (scalar | avx2 | neon | auto) or set_backend() can
// override the choice. All matrices are row-major and contiguous.

#include <cstddef>
#include <string_view>
#include <vector>

namespace gmlp::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // c[m x n] += a^T * b, a stored as [k x m], b as [k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // c[m x n] += a * b^T, a stored as [m x k], b as [n x k]
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // out = x + y
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  // out = x * y (elementwise)
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  // out = alpha * x
  void (*scale)(std::size_t n, double alpha, const double* x, double* out);
  double (*dot)(std::size_t n, const double* x, const double* y);
  double (*sum)(std::size_t n, const double* x);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

bool backend_supported(Backend backend);
std::vector<Backend> supported_backends();
std::string_view backend_name(Backend backend);

/// Throws ContractError if the backend is not available on this CPU.
void set_backend(Backend backend);
Backend active_backend();
const KernelTable& active();

// Convenience forwarding to the active table.
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_nn(m, n, k, a, b, c);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_tn(m, n, k, a, b, c);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  active().gemm_nt(m, n, k, a, b, c);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) { active().axpy(n, alpha, x, y); }
inline void add(std::size_t n, const double* x, const double* y, double* out) { active().add(n, x, y, out); }
inline void mul(std::size_t n, const double* x, const double* y, double* out) { active().mul(n, x, y, out); }
inline void scale(std::size_t n, double alpha, const double* x, double* out) { active().scale(n, alpha, x, out); }
inline double dot(std::size_t n, const double* x, const double* y) { return active().dot(n, x, y); }
inline double sum(std::size_t n, const double* x) { return active().sum(n, x); }

}  // namespace gmlp::kernels
