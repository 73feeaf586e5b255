#include <atomic>
#include <cstdlib>
#include <string>

#include "gmlp/error.hpp"
#include "gmlp/kernels.hpp"

namespace gmlp::kernels {
namespace {

const KernelTable& table_for(Backend backend) {
  switch (backend) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::avx2:
      return avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

Backend detect() {
  const char* env = std::getenv("GRAPHMLP_KERNELS");
  if (env != nullptr) {
    const std::string requested(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (requested == backend_name(b) && backend_supported(b)) return b;
    }
  }
  if (backend_supported(Backend::avx2)) return Backend::avx2;
  if (backend_supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

struct State {
  std::atomic<Backend> backend;
  std::atomic<const KernelTable*> table;
  State() : backend(detect()), table(&table_for(backend.load())) {}
};

State& state() {
  static State s;
  return s;
}

}  // namespace

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> supported_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (backend_supported(b)) out.push_back(b);
  }
  return out;
}

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ContractError("kernel backend '" + std::string(backend_name(backend)) + "' is not supported on this CPU");
  }
  state().table.store(&table_for(backend));
  state().backend.store(backend);
}

Backend active_backend() { return state().backend.load(); }

const KernelTable& active() { return *state().table.load(std::memory_order_relaxed); }

}  // namespace gmlp::kernels
