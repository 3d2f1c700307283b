#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "structhinf/expr.hpp"

namespace structhinf {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-subsystem dimensions. Totals are sums of the parts.
struct Partition {
    std::vector<int> n;    // states
    std::vector<int> m_w;  // exogenous inputs
    std::vector<int> m_u;  // control inputs
    std::vector<int> o_y;  // measurements
    std::vector<int> p;    // parameters

    int subsystems() const { return static_cast<int>(n.size()); }
    int n_total() const;
    int m_w_total() const;
    int m_u_total() const;
    int o_y_total() const;
    int p_total() const;

    /// Row/column offset of block i in a partition vector.
    static int offset(const std::vector<int>& parts, int i);
    /// Subsystem owning parameter index `k`.
    int param_owner(std::size_t k) const;

    /// Throws ValidationError unless N >= 1, all vectors have length N and parts are >= 0.
    void check() const;
};

enum class GraphRole { Control, Design };

/// Directed graph stored as its adjacency matrix: s(i, j) = 1 iff edge j -> i,
/// i.e. subsystem i receives information from subsystem j.
class Graph {
public:
    Graph() = default;
    Graph(int n, GraphRole role);

    /// `neighbors[i]` lists every j with s(i, j) = 1.
    static Graph from_lists(const std::vector<std::vector<int>>& neighbors, GraphRole role);
    static Graph complete(int n, GraphRole role);
    static Graph self_loops(int n, GraphRole role);

    int size() const { return n_; }
    GraphRole role() const { return role_; }
    bool operator()(int i, int j) const { return s_[static_cast<std::size_t>(i * n_ + j)] != 0; }
    void set(int i, int j, bool v) { s_[static_cast<std::size_t>(i * n_ + j)] = v ? 1 : 0; }
    std::vector<std::vector<int>> to_lists() const;

private:
    int n_ = 0;
    GraphRole role_ = GraphRole::Control;
    std::vector<unsigned char> s_;
};

/// Product of closed intervals, the admissible parameter set.
struct ParamBox {
    VectorXd lo;
    VectorXd hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const VectorXd& alpha) const;
    std::vector<Interval> intervals() const;
    /// Uniform grid with `n` points per dimension (n == 1 gives the centre), first coordinate fastest.
    std::vector<VectorXd> grid(int n) const;
};

/// Coefficient matrices multiplying one plant basis function.
struct PlantCoefficients {
    MatrixXd A, Bw, Bu, Cy, Dyw;
};

/// Plant, measurement and performance matrices evaluated at one parameter value.
struct PlantMatrices {
    MatrixXd A, Bw, Bu, Cy, Dyw;
};

/// Continuous-time realization (A, B, C, D).
struct StateSpace {
    MatrixXd A, B, C, D;

    int states() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B.cols()); }
    int outputs() const { return static_cast<int>(C.rows()); }
};

/// Parameter-dependent interconnected plant
///   dx = A(a) x + Bw(a) w + Bu(a) u,   y = Cy(a) x + Dyw(a) w,   z = Cz x + Dzw w + Dzu u
/// with every a-dependent matrix expanded over the plant basis `xi`.
struct ParamSystem {
    std::shared_ptr<const BasisSet> xi;
    std::vector<PlantCoefficients> coeffs;  // one per xi function
    MatrixXd Cz, Dzw, Dzu;
    Partition partition;
    Graph control_graph;
    Graph design_graph;
    ParamBox box;

    int n() const { return partition.n_total(); }
    int m_w() const { return partition.m_w_total(); }
    int m_u() const { return partition.m_u_total(); }
    int o_y() const { return partition.o_y_total(); }
    int o_z() const { return static_cast<int>(Cz.rows()); }
    int p() const { return partition.p_total(); }
    int basis_size() const { return static_cast<int>(coeffs.size()); }
    const std::vector<std::string>& param_names() const { return xi->params(); }
};

/// Control design strategy Gamma(a) = sum_l eta_l(a) G_l with per-coefficient structure masks.
struct GainExpansion {
    std::shared_ptr<const BasisSet> eta;
    std::vector<MatrixXd> G;      // m_u x o_y each
    std::vector<MatrixXd> masks;  // 0/1, same shapes

    int size() const { return static_cast<int>(G.size()); }
    /// K' = [G_1 ... G_L'].
    MatrixXd stacked() const;
    /// Frobenius norm over all coefficients.
    double norm() const;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;

    bool ok() const { return errors.empty(); }
};

struct ValidationOptions {
    int grid_points = 3;     // per parameter dimension for sampled checks
    double rank_tol = 1e-9;  // relative singular-value threshold in PBH tests
};

/// Structure, dimension, and sampled Assumption-style checks. Dimension and
/// control-graph violations are errors; normalisation and PBH failures are warnings.
ValidationReport validate_system(const ParamSystem& sys, const ValidationOptions& opts = {});

/// Throws ValidationError if any matrix has the wrong shape.
void check_dimensions(const ParamSystem& sys);

/// Sum over the plant basis. Throws ValidationError if `alpha` lies outside the box.
PlantMatrices eval_matrices(const ParamSystem& sys, const VectorXd& alpha);
/// Partial derivatives of the plant matrices with respect to alpha_i.
PlantMatrices eval_matrix_derivatives(const ParamSystem& sys, const VectorXd& alpha, std::size_t i);

/// K = sum_l eta_l(alpha) G_l.
MatrixXd eval_strategy(const GainExpansion& gamma, const VectorXd& alpha);
MatrixXd eval_strategy_derivative(const GainExpansion& gamma, const VectorXd& alpha, std::size_t i);

/// Closed loop from w to z under u = K y.
StateSpace closed_loop(const ParamSystem& sys, const MatrixXd& K, const PlantMatrices& m);
StateSpace closed_loop(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha);

/// Block (i, i) of mask l is one iff every parameter eta_l depends on belongs to a
/// subsystem j with s_C(i, j) = 1. Off-diagonal blocks are zero.
std::vector<MatrixXd> structure_masks(const Partition& part, const Graph& design, const BasisSet& eta);

/// Entrywise product with the masks (Euclidean projection onto the feasible subspace).
GainExpansion project_gains(const GainExpansion& gamma, const std::vector<MatrixXd>& masks);
void project_gains_inplace(std::vector<MatrixXd>& G, const std::vector<MatrixXd>& masks);

/// Coordinatewise clamp onto the box.
VectorXd project_params(const VectorXd& alpha, const ParamBox& box);

/// True iff every (i, j) block with s(i, j) = 0 is exactly zero.
bool in_structured_set(const MatrixXd& X, const Graph& s, const std::vector<int>& rows, const std::vector<int>& cols);

/// Zero strategy with masks derived from the system's design graph.
GainExpansion zero_strategy(const ParamSystem& sys, std::shared_ptr<const BasisSet> eta);

}  // namespace structhinf
