#pragma once

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "artifact/common.hpp"

namespace artifact::detail {

// Unnormalized multi-dimensional complex DFT on a fixed row-major grid.
// forward: sum_x f(x) e^{-2πi k·x/M}; backward: sum_k F(k) e^{+2πi k·x/M}.
class FftGrid {
 public:
  explicit FftGrid(std::vector<int> dims);
  ~FftGrid();
  FftGrid(const FftGrid&) = delete;
  FftGrid& operator=(const FftGrid&) = delete;

  int size() const { return size_; }
  const std::vector<int>& dims() const { return dims_; }
  void forward(const cplx* in, cplx* out) const { run(fwd_, in, out); }
  void backward(const cplx* in, cplx* out) const { run(bwd_, in, out); }

 private:
  void run(fftw_plan plan, const cplx* in, cplx* out) const;

  std::vector<int> dims_;
  int size_ = 1;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace artifact::detail
