#include "structhinf/system.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "structhinf/errors.hpp"

namespace structhinf {

namespace {

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

std::string shape(const MatrixXd& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const MatrixXd& m, Eigen::Index r, Eigen::Index c, const std::string& what) {
    if (m.rows() != r || m.cols() != c)
        throw ValidationError(what + " has shape " + shape(m) + ", expected " + std::to_string(r) + "x" +
                              std::to_string(c));
}

}  // namespace

int Partition::n_total() const { return sum(n); }
int Partition::m_w_total() const { return sum(m_w); }
int Partition::m_u_total() const { return sum(m_u); }
int Partition::o_y_total() const { return sum(o_y); }
int Partition::p_total() const { return sum(p); }

int Partition::offset(const std::vector<int>& parts, int i) {
    return std::accumulate(parts.begin(), parts.begin() + i, 0);
}

int Partition::param_owner(std::size_t k) const {
    int acc = 0;
    for (int i = 0; i < subsystems(); ++i) {
        acc += p[static_cast<std::size_t>(i)];
        if (static_cast<int>(k) < acc) return i;
    }
    throw ValidationError("parameter index " + std::to_string(k) + " is not owned by any subsystem");
}

void Partition::check() const {
    const std::size_t N = n.size();
    if (N == 0) throw ValidationError("partition must have at least one subsystem");
    if (m_w.size() != N || m_u.size() != N || o_y.size() != N || p.size() != N)
        throw ValidationError("partition vectors n, m_w, m_u, o_y, p must all have length N = " + std::to_string(N));
    for (const auto* v : {&n, &m_w, &m_u, &o_y, &p}) {
        for (int x : *v) {
            if (x < 0) throw ValidationError("partition entries must be nonnegative");
        }
    }
}

Graph::Graph(int n, GraphRole role) : n_(n), role_(role), s_(static_cast<std::size_t>(n * n), 0) {}

Graph Graph::from_lists(const std::vector<std::vector<int>>& neighbors, GraphRole role) {
    const int n = static_cast<int>(neighbors.size());
    Graph g(n, role);
    for (int i = 0; i < n; ++i) {
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            if (j < 0 || j >= n)
                throw ValidationError("graph adjacency list of vertex " + std::to_string(i) + " references vertex " +
                                      std::to_string(j) + " outside [0, " + std::to_string(n) + ")");
            g.set(i, j, true);
        }
    }
    return g;
}

Graph Graph::complete(int n, GraphRole role) {
    Graph g(n, role);
    std::fill(g.s_.begin(), g.s_.end(), 1);
    return g;
}

Graph Graph::self_loops(int n, GraphRole role) {
    Graph g(n, role);
    for (int i = 0; i < n; ++i) g.set(i, i, true);
    return g;
}

std::vector<std::vector<int>> Graph::to_lists() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            if ((*this)(i, j)) out[static_cast<std::size_t>(i)].push_back(j);
        }
    }
    return out;
}

bool ParamBox::contains(const VectorXd& alpha) const {
    if (alpha.size() != lo.size()) return false;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(alpha(i) >= lo(i) && alpha(i) <= hi(i))) return false;
    }
    return true;
}

std::vector<Interval> ParamBox::intervals() const {
    std::vector<Interval> out;
    for (Eigen::Index i = 0; i < lo.size(); ++i) out.push_back({lo(i), hi(i)});
    return out;
}

std::vector<VectorXd> ParamBox::grid(int n) const {
    const int p = dim();
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
        auto& ax = axes[static_cast<std::size_t>(i)];
        if (n <= 1) {
            ax.push_back(0.5 * (lo(i) + hi(i)));
        } else {
            for (int k = 0; k < n; ++k) {
                // Exact endpoints; interior points via convex combination.
                const double t = static_cast<double>(k) / (n - 1);
                ax.push_back(k == n - 1 ? hi(i) : lo(i) + t * (hi(i) - lo(i)));
            }
        }
    }
    std::size_t total = 1;
    for (const auto& ax : axes) total *= ax.size();
    std::vector<VectorXd> pts;
    pts.reserve(total);
    std::vector<std::size_t> idx(static_cast<std::size_t>(p), 0);
    for (std::size_t c = 0; c < total; ++c) {
        VectorXd a(p);
        for (int i = 0; i < p; ++i) a(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
        pts.push_back(std::move(a));
        for (int i = 0; i < p; ++i) {
            if (++idx[static_cast<std::size_t>(i)] < axes[static_cast<std::size_t>(i)].size()) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return pts;
}

MatrixXd GainExpansion::stacked() const {
    if (G.empty()) return {};
    MatrixXd k(G.front().rows(), G.front().cols() * static_cast<Eigen::Index>(G.size()));
    for (std::size_t l = 0; l < G.size(); ++l) k.middleCols(static_cast<Eigen::Index>(l) * G[l].cols(), G[l].cols()) = G[l];
    return k;
}

double GainExpansion::norm() const {
    double s = 0.0;
    for (const auto& g : G) s += g.squaredNorm();
    return std::sqrt(s);
}

bool in_structured_set(const MatrixXd& X, const Graph& s, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int N = s.size();
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (s(i, j)) continue;
            const int r0 = Partition::offset(rows, i), c0 = Partition::offset(cols, j);
            const auto blk = X.block(r0, c0, rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
            if (blk.size() > 0 && (blk.array() != 0.0).any()) return false;
        }
    }
    return true;
}

void check_dimensions(const ParamSystem& sys) {
    sys.partition.check();
    const int N = sys.partition.subsystems();
    if (!sys.xi) throw ValidationError("plant basis is missing");
    if (sys.coeffs.size() != sys.xi->size())
        throw ValidationError("matrices given for " + std::to_string(sys.coeffs.size()) + " basis functions, but xi has " +
                              std::to_string(sys.xi->size()));
    if (static_cast<int>(sys.xi->num_params()) != sys.p())
        throw ValidationError("partition declares p = " + std::to_string(sys.p()) + " parameters, but " +
                              std::to_string(sys.xi->num_params()) + " are named");
    if (sys.box.dim() != sys.p() || sys.box.hi.size() != sys.box.lo.size())
        throw ValidationError("parameter box dimension does not match the parameter count");
    for (int i = 0; i < sys.box.dim(); ++i) {
        if (!std::isfinite(sys.box.lo(i)) || !std::isfinite(sys.box.hi(i)) || sys.box.lo(i) > sys.box.hi(i))
            throw ValidationError("parameter box must be nonempty and bounded in coordinate " + std::to_string(i));
    }
    if (sys.control_graph.size() != N) throw ValidationError("control graph must have N = " + std::to_string(N) + " vertices");
    if (sys.design_graph.size() != N) throw ValidationError("design graph must have N = " + std::to_string(N) + " vertices");
    const int n = sys.n(), mw = sys.m_w(), mu = sys.m_u(), oy = sys.o_y();
    for (std::size_t l = 0; l < sys.coeffs.size(); ++l) {
        const auto& c = sys.coeffs[l];
        const std::string tag = "[xi " + std::to_string(l) + "] ";
        expect_shape(c.A, n, n, tag + "A");
        expect_shape(c.Bw, n, mw, tag + "Bw");
        expect_shape(c.Bu, n, mu, tag + "Bu");
        expect_shape(c.Cy, oy, n, tag + "Cy");
        expect_shape(c.Dyw, oy, mw, tag + "Dyw");
    }
    const Eigen::Index oz = sys.Cz.rows();
    expect_shape(sys.Cz, oz, n, "Cz");
    expect_shape(sys.Dzw, oz, mw, "Dzw");
    expect_shape(sys.Dzu, oz, mu, "Dzu");
}

namespace {

// Smallest singular value of M relative to its largest (or 1).
double relative_rank_gap(const Eigen::MatrixXcd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    return s(s.size() - 1) / std::max(1.0, s(0));
}

bool pbh_ok(const MatrixXd& A, const MatrixXd& X, bool input_side, double tol) {
    const Eigen::Index n = A.rows();
    if (n == 0) return true;
    Eigen::EigenSolver<MatrixXd> es(A, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration failed in PBH test");
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::complex<double> lam = es.eigenvalues()(k);
        if (lam.real() < -1e-12) continue;
        const Eigen::MatrixXcd L = lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
        Eigen::MatrixXcd M;
        if (input_side) {
            M.resize(n, n + X.cols());
            M << L, X.cast<std::complex<double>>();
        } else {
            M.resize(n + X.rows(), n);
            M << L, X.cast<std::complex<double>>();
        }
        if (relative_rank_gap(M) < tol) return false;
    }
    return true;
}

std::string fmt_alpha(const VectorXd& a) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? ", " : "") << a(i);
    os << ')';
    return os.str();
}

}  // namespace

ValidationReport validate_system(const ParamSystem& sys, const ValidationOptions& opts) {
    ValidationReport rep;
    try {
        check_dimensions(sys);
    } catch (const ValidationError& e) {
        rep.errors.push_back(std::string("dimension: ") + e.what());
        return rep;
    }
    try {
        const auto box = sys.box.intervals();
        sys.xi->check_on_box(box);
    } catch (const ValidationError& e) {
        rep.errors.push_back(std::string("basis: ") + e.what());
    }

    const auto& part = sys.partition;
    for (std::size_t l = 0; l < sys.coeffs.size(); ++l) {
        if (!in_structured_set(sys.coeffs[l].Cy, sys.control_graph, part.o_y, part.n))
            rep.errors.push_back("structure: Cy coefficient " + std::to_string(l) +
                                 " has a nonzero block where the control graph has no edge");
        if (!in_structured_set(sys.coeffs[l].Dyw, sys.control_graph, part.o_y, part.m_w))
            rep.errors.push_back("structure: Dyw coefficient " + std::to_string(l) +
                                 " has a nonzero block where the control graph has no edge");
    }
    if (rep.errors.empty()) rep.notes.push_back("measurement matrices obey the control-graph structure");

    const Eigen::Index mu = sys.Dzu.cols();
    if (!(sys.Dzu.transpose() * sys.Dzu).isApprox(MatrixXd::Identity(mu, mu), 1e-9) && mu > 0)
        rep.warnings.push_back("normalisation: Dzu^T Dzu != I (sufficient condition only; continuing)");

    int dyw_bad = 0, stab_bad = 0, det_bad = 0;
    VectorXd first_stab, first_det, first_dyw;
    const auto pts = sys.box.grid(opts.grid_points);
    for (const auto& a : pts) {
        const PlantMatrices m = eval_matrices(sys, a);
        const Eigen::Index oy = m.Dyw.rows();
        if (oy > 0 && !(m.Dyw * m.Dyw.transpose()).isApprox(MatrixXd::Identity(oy, oy), 1e-9)) {
            if (dyw_bad++ == 0) first_dyw = a;
        }
        if (!pbh_ok(m.A, m.Bu, true, opts.rank_tol)) {
            if (stab_bad++ == 0) first_stab = a;
        }
        if (!pbh_ok(m.A, m.Cy, false, opts.rank_tol)) {
            if (det_bad++ == 0) first_det = a;
        }
    }
    const std::string of = " of " + std::to_string(pts.size()) + " sampled points";
    if (dyw_bad)
        rep.warnings.push_back("normalisation: Dyw Dyw^T != I at " + std::to_string(dyw_bad) + of + ", first at " +
                               fmt_alpha(first_dyw) + " (sufficient condition only; continuing)");
    if (stab_bad)
        rep.warnings.push_back("PBH: (A, Bu) not stabilizable at " + std::to_string(stab_bad) + of + ", first at " +
                               fmt_alpha(first_stab));
    if (det_bad)
        rep.warnings.push_back("PBH: (A, Cy) not detectable at " + std::to_string(det_bad) + of + ", first at " +
                               fmt_alpha(first_det));
    if (!stab_bad && !det_bad)
        rep.notes.push_back("PBH stabilizability and detectability hold at all" + of);
    return rep;
}

PlantMatrices eval_matrices(const ParamSystem& sys, const VectorXd& alpha) {
    if (!sys.box.contains(alpha)) throw ValidationError("parameter " + fmt_alpha(alpha) + " lies outside the box");
    const VectorXd xi = sys.xi->eval(alpha);
    const int n = sys.n(), mw = sys.m_w(), mu = sys.m_u(), oy = sys.o_y();
    PlantMatrices m{MatrixXd::Zero(n, n), MatrixXd::Zero(n, mw), MatrixXd::Zero(n, mu), MatrixXd::Zero(oy, n),
                    MatrixXd::Zero(oy, mw)};
    for (std::size_t l = 0; l < sys.coeffs.size(); ++l) {
        const double w = xi(static_cast<Eigen::Index>(l));
        if (w == 0.0) continue;
        const auto& c = sys.coeffs[l];
        m.A += w * c.A;
        m.Bw += w * c.Bw;
        m.Bu += w * c.Bu;
        m.Cy += w * c.Cy;
        m.Dyw += w * c.Dyw;
    }
    return m;
}

PlantMatrices eval_matrix_derivatives(const ParamSystem& sys, const VectorXd& alpha, std::size_t i) {
    const int n = sys.n(), mw = sys.m_w(), mu = sys.m_u(), oy = sys.o_y();
    PlantMatrices m{MatrixXd::Zero(n, n), MatrixXd::Zero(n, mw), MatrixXd::Zero(n, mu), MatrixXd::Zero(oy, n),
                    MatrixXd::Zero(oy, mw)};
    for (std::size_t l = 0; l < sys.coeffs.size(); ++l) {
        if (!(*sys.xi)[l].depends_on(i)) continue;
        const double w = sys.xi->derivative(l, i).eval(alpha);
        const auto& c = sys.coeffs[l];
        m.A += w * c.A;
        m.Bw += w * c.Bw;
        m.Bu += w * c.Bu;
        m.Cy += w * c.Cy;
        m.Dyw += w * c.Dyw;
    }
    return m;
}

MatrixXd eval_strategy(const GainExpansion& gamma, const VectorXd& alpha) {
    if (gamma.G.empty()) return {};
    MatrixXd K = MatrixXd::Zero(gamma.G.front().rows(), gamma.G.front().cols());
    for (std::size_t l = 0; l < gamma.G.size(); ++l) K += (*gamma.eta)[l].eval(alpha) * gamma.G[l];
    return K;
}

MatrixXd eval_strategy_derivative(const GainExpansion& gamma, const VectorXd& alpha, std::size_t i) {
    if (gamma.G.empty()) return {};
    MatrixXd K = MatrixXd::Zero(gamma.G.front().rows(), gamma.G.front().cols());
    for (std::size_t l = 0; l < gamma.G.size(); ++l) {
        if ((*gamma.eta)[l].depends_on(i)) K += gamma.eta->derivative(l, i).eval(alpha) * gamma.G[l];
    }
    return K;
}

StateSpace closed_loop(const ParamSystem& sys, const MatrixXd& K, const PlantMatrices& m) {
    const MatrixXd BuK = m.Bu * K;
    const MatrixXd DzuK = sys.Dzu * K;
    return StateSpace{m.A + BuK * m.Cy, m.Bw + BuK * m.Dyw, sys.Cz + DzuK * m.Cy, sys.Dzw + DzuK * m.Dyw};
}

StateSpace closed_loop(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha) {
    return closed_loop(sys, eval_strategy(gamma, alpha), eval_matrices(sys, alpha));
}

std::vector<MatrixXd> structure_masks(const Partition& part, const Graph& design, const BasisSet& eta) {
    const int N = part.subsystems();
    const int mu = part.m_u_total(), oy = part.o_y_total();
    std::vector<MatrixXd> masks;
    masks.reserve(eta.size());
    for (std::size_t l = 0; l < eta.size(); ++l) {
        MatrixXd mask = MatrixXd::Zero(mu, oy);
        for (int i = 0; i < N; ++i) {
            bool allowed = true;
            for (std::size_t k : eta.dependencies(l)) {
                if (!design(i, part.param_owner(k))) {
                    allowed = false;
                    break;
                }
            }
            if (!allowed) continue;
            mask.block(Partition::offset(part.m_u, i), Partition::offset(part.o_y, i), part.m_u[static_cast<std::size_t>(i)],
                       part.o_y[static_cast<std::size_t>(i)])
                .setOnes();
        }
        masks.push_back(std::move(mask));
    }
    return masks;
}

void project_gains_inplace(std::vector<MatrixXd>& G, const std::vector<MatrixXd>& masks) {
    for (std::size_t l = 0; l < G.size(); ++l) G[l] = G[l].cwiseProduct(masks[l]);
}

GainExpansion project_gains(const GainExpansion& gamma, const std::vector<MatrixXd>& masks) {
    GainExpansion out = gamma;
    project_gains_inplace(out.G, masks);
    out.masks = masks;
    return out;
}

VectorXd project_params(const VectorXd& alpha, const ParamBox& box) {
    return alpha.cwiseMax(box.lo).cwiseMin(box.hi);
}

GainExpansion zero_strategy(const ParamSystem& sys, std::shared_ptr<const BasisSet> eta) {
    GainExpansion g;
    g.masks = structure_masks(sys.partition, sys.design_graph, *eta);
    g.G.assign(eta->size(), MatrixXd::Zero(sys.m_u(), sys.o_y()));
    g.eta = std::move(eta);
    return g;
}

}  // namespace structhinf
