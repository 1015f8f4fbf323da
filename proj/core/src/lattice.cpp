#include "stormfield/lattice.hpp"

#include <stdexcept>
#include <string>

namespace stormfield {

void GridSpec::validate() const {
  if (n < 3) {
    throw std::invalid_argument("lattice needs n >= 3 so periodic neighbours are distinct, got n = " +
                                std::to_string(n));
  }
  if (!(cell_size_m > 0.0)) throw std::invalid_argument("cell size must be positive");
}

StencilWeights theta_stencil(double alpha, double beta, Velocity nu) {
  return {alpha * (1.0 - 4.0 * beta), alpha * (beta - nu.x), alpha * (beta + nu.x), alpha * (beta - nu.y),
          alpha * (beta + nu.y)};
}

StencilWeights source_stencil(double alpha_star, double beta_star) {
  const double side = alpha_star * beta_star;
  return {alpha_star * (1.0 - 4.0 * beta_star), side, side, side, side};
}

int linear_index(int i, int j, const GridSpec& grid) {
  if (i < 1 || i > grid.n || j < 1 || j > grid.n) {
    throw std::out_of_range("cell (" + std::to_string(i) + ", " + std::to_string(j) + ") outside " +
                            std::to_string(grid.n) + "x" + std::to_string(grid.n) + " lattice");
  }
  return (j - 1) * grid.n + (i - 1);
}

Neighbors periodic_neighbors(int idx, const GridSpec& grid) {
  const int n = grid.n;
  if (idx < 0 || idx >= grid.cells()) {
    throw std::out_of_range("cell index " + std::to_string(idx) + " outside lattice");
  }
  const int i = idx % n;
  const int j = idx / n;
  const auto at = [n](int ii, int jj) { return jj * n + ii; };
  return {at((i + 1) % n, j), at((i + n - 1) % n, j), at(i, (j + 1) % n), at(i, (j + n - 1) % n)};
}

Lattice::Lattice(GridSpec grid) : grid_(grid) {
  grid_.validate();
  table_.reserve(static_cast<std::size_t>(grid_.cells()));
  for (int idx = 0; idx < grid_.cells(); ++idx) table_.push_back(periodic_neighbors(idx, grid_));
}

void Lattice::apply(const StencilWeights& w, std::span<const double> in, std::span<double> out) const {
  const int count = cells();
  for (int r = 0; r < count; ++r) {
    const Neighbors& nb = table_[static_cast<std::size_t>(r)];
    out[r] = w.center * in[r] + w.east * in[nb.east] + w.west * in[nb.west] + w.north * in[nb.north] +
             w.south * in[nb.south];
  }
}

Eigen::VectorXd Lattice::apply(const StencilWeights& w, const Eigen::Ref<const Eigen::VectorXd>& in) const {
  Eigen::VectorXd out(cells());
  apply(w, std::span<const double>(in.data(), static_cast<std::size_t>(in.size())),
        std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

void Lattice::advection_differences(std::span<const double> in, std::span<double> dx, std::span<double> dy) const {
  const int count = cells();
  for (int r = 0; r < count; ++r) {
    const Neighbors& nb = table_[static_cast<std::size_t>(r)];
    dx[r] = in[nb.west] - in[nb.east];
    dy[r] = in[nb.south] - in[nb.north];
  }
}

void Lattice::laplacian(std::span<const double> in, std::span<double> out) const {
  const int count = cells();
  for (int r = 0; r < count; ++r) {
    const Neighbors& nb = table_[static_cast<std::size_t>(r)];
    out[r] = in[nb.east] + in[nb.west] + in[nb.north] + in[nb.south] - 4.0 * in[r];
  }
}

EvolutionOperator::EvolutionOperator(const Lattice& lattice, StencilWeights weights)
    : lattice_(&lattice), weights_(weights), csr_(lattice.cells(), lattice.cells()) {
  const int count = lattice.cells();
  csr_.reserve(Eigen::VectorXi::Constant(count, 5));
  for (int r = 0; r < count; ++r) {
    const Neighbors& nb = lattice.neighbors(r);
    csr_.insert(r, r) = weights.center;
    csr_.insert(r, nb.east) = weights.east;
    csr_.insert(r, nb.west) = weights.west;
    csr_.insert(r, nb.north) = weights.north;
    csr_.insert(r, nb.south) = weights.south;
  }
  csr_.makeCompressed();
}

Eigen::VectorXd EvolutionOperator::apply(const Eigen::Ref<const Eigen::VectorXd>& in) const {
  return lattice_->apply(weights_, in);
}

EvolutionOperator build_theta_evolution(double alpha, double beta, Velocity nu, const Lattice& lattice) {
  return EvolutionOperator(lattice, theta_stencil(alpha, beta, nu));
}

EvolutionOperator build_source_evolution(double alpha_star, double beta_star, const Lattice& lattice) {
  return EvolutionOperator(lattice, source_stencil(alpha_star, beta_star));
}

}  // namespace stormfield
