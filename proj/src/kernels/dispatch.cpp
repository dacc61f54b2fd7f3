#include <cstdlib>
#include <stdexcept>
#include <string>

#include "fedpop/kernels.hpp"

namespace fedpop::kernels {
namespace {

const Ops* select_default() {
  if (const char* env = std::getenv("FEDPOP_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_ops();
    if (want == "avx2" && avx2_ops()) return avx2_ops();
  }
  if (const Ops* simd = avx2_ops()) return simd;
  return &scalar_ops();
}

const Ops*& current() {
  static const Ops* ops = select_default();
  return ops;
}

}  // namespace

const Ops& active() { return *current(); }

void force(const std::string& name) {
  if (name == "scalar") {
    current() = &scalar_ops();
    return;
  }
  if (name == "avx2") {
    if (const Ops* simd = avx2_ops()) {
      current() = simd;
      return;
    }
    throw std::invalid_argument("avx2 kernels not available on this CPU");
  }
  throw std::invalid_argument("unknown kernel implementation: " + name);
}

std::vector<const Ops*> available() {
  std::vector<const Ops*> out{&scalar_ops()};
  if (const Ops* simd = avx2_ops()) out.push_back(simd);
  return out;
}

}  // namespace fedpop::kernels
