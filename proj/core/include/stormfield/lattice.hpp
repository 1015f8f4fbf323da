#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace stormfield {

/// Square n x n lattice with periodic boundaries.
///
/// Cells are addressed either by a 1-based pair (i, j) or by a linear index
/// (j - 1) * n + (i - 1), so i runs fastest. The i axis is the "x" (east)
/// direction and the j axis is the "y" (north) direction.
struct GridSpec {
  int n = 0;
  double cell_size_m = 500.0;

  int cells() const { return n * n; }
  /// Throws std::invalid_argument unless n >= 3 and the cell size is positive.
  void validate() const;
};

/// Advection velocity in cells per time-step along the i (x) and j (y) axes.
struct Velocity {
  double x = 0.0;
  double y = 0.0;
};

/// Five-point stencil weights.
struct StencilWeights {
  double center = 0.0;
  double east = 0.0;   // (i + 1, j)
  double west = 0.0;   // (i - 1, j)
  double north = 0.0;  // (i, j + 1)
  double south = 0.0;  // (i, j - 1)

  double sum() const { return center + east + west + north + south; }
};

/// Advection-diffusion stencil scaled by the persistence alpha:
/// center alpha(1 - 4 beta), east alpha(beta - nu_x), west alpha(beta + nu_x),
/// north alpha(beta - nu_y), south alpha(beta + nu_y).
StencilWeights theta_stencil(double alpha, double beta, Velocity nu);

/// Symmetric diffusion-decay stencil for the source-sink field.
StencilWeights source_stencil(double alpha_star, double beta_star);

struct Neighbors {
  int east = 0;
  int west = 0;
  int north = 0;
  int south = 0;
};

/// Linear index of 1-based cell (i, j). Throws std::out_of_range.
int linear_index(int i, int j, const GridSpec& grid);

/// Neighbours of a linear index with periodic wrap. Throws std::out_of_range.
Neighbors periodic_neighbors(int idx, const GridSpec& grid);

/// Lattice geometry with a precomputed neighbour table.
class Lattice {
 public:
  explicit Lattice(GridSpec grid);

  const GridSpec& grid() const { return grid_; }
  int n() const { return grid_.n; }
  int cells() const { return grid_.cells(); }
  const Neighbors& neighbors(int idx) const { return table_[static_cast<std::size_t>(idx)]; }

  /// out = G in for the operator defined by `w`, without materialising G.
  /// Each row is summed in a fixed order, so results are reproducible.
  void apply(const StencilWeights& w, std::span<const double> in, std::span<double> out) const;
  Eigen::VectorXd apply(const StencilWeights& w, const Eigen::Ref<const Eigen::VectorXd>& in) const;

  /// Per-cell differences d_west - d_east and d_south - d_north, the
  /// coefficients of nu_x and nu_y in the advection part of the stencil.
  void advection_differences(std::span<const double> in, std::span<double> dx, std::span<double> dy) const;
  /// Per-cell d_east + d_west + d_north + d_south - 4 d, the discrete Laplacian.
  void laplacian(std::span<const double> in, std::span<double> out) const;

 private:
  GridSpec grid_;
  std::vector<Neighbors> table_;
};

using SparseMatrixRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Evolution operator on a lattice: stored as compressed sparse rows and
/// applicable matrix-free. Exactly five non-zeros per row.
class EvolutionOperator {
 public:
  EvolutionOperator(const Lattice& lattice, StencilWeights weights);

  const StencilWeights& weights() const { return weights_; }
  const SparseMatrixRM& csr() const { return csr_; }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& in) const;
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(csr_); }

 private:
  const Lattice* lattice_;
  StencilWeights weights_;
  SparseMatrixRM csr_;
};

/// G(nu) for the precipitation field.
EvolutionOperator build_theta_evolution(double alpha, double beta, Velocity nu, const Lattice& lattice);
/// G* for the source-sink field.
EvolutionOperator build_source_evolution(double alpha_star, double beta_star, const Lattice& lattice);

}  // namespace stormfield
