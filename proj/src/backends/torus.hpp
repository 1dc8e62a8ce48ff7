#pragma once

#include <memory>

#include "artifact/backends.hpp"
#include "fft.hpp"

namespace artifact {

// Complex torus C^n / (Z^n + τ Z^n) with a Fourier basis generated by integer
// vectors v_r in Z^{2n}: modes m = Σ c_r v_r, |c_r| <= N_r, on a θ-grid with
// θ_r = v_r·u sampled at M_r = 4 N_r + 2 points.
class TorusGeometry : public Geometry {
 public:
  explicit TorusGeometry(const BackendConfig& cfg);

  std::string id() const override { return id_; }
  std::string kind() const override { return "torus"; }
  int n() const override { return n_; }
  const NodeGeometry& nodes() const override { return ng_; }
  bool supports(const SpaceKey& k) const override { return k.bundle.power == 0 && k.q >= 0 && k.q <= n_; }
  std::unique_ptr<RawSpace> make_space(const SpaceKey& k) const override;
  Mat raw_dbar(const SpaceKey& k) const override;
  bool kahler_einstein() const override { return flat_; }
  int product_bandwidth_limit() const override;

  // Fourier data.
  int num_modes() const { return static_cast<int>(modes_.size()); }
  const std::vector<int>& mode_index() const { return fft_index_; }
  cplx multiplier(const std::vector<int>& m, int i) const;  // i < n: ∂_{z_i}; i >= n: ∂_{zbar_{i-n}}
  cplx mode_multiplier(int mode, int i) const { return mult_[mode][i]; }
  const detail::FftGrid& grid() const { return *grid_; }
  bool standard_generators() const { return standard_; }
  const RMat& node_points() const;
  int max_bandwidth() const;
  const Mat& tau() const { return tau_; }
  const RMat& imag_tau() const { return T_; }

 protected:
  TorusGeometry(const BackendConfig& cfg, Mat flat_metric, int min_grid);
  void finish_metric(const BackendConfig& cfg, Mat flat_metric);
  std::string id_;
  int n_;
  Mat tau_;
  RMat T_, S_;
  bool flat_ = true;
  bool standard_ = true;
  std::vector<std::vector<int>> gens_;
  std::vector<int> N_, M_;
  std::vector<std::vector<int>> modes_;  // full mode vectors in Z^{2n}
  std::vector<int> fft_index_;
  std::vector<std::vector<cplx>> mult_;
  std::unique_ptr<detail::FftGrid> grid_;
  NodeGeometry ng_;
  RMat points_;
  RMat theta_;
  std::vector<std::vector<int>> gcoords_;
  BackendConfig cfg_;
};

}  // namespace artifact
