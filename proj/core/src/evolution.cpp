#include "kolmo/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "kolmo/error.hpp"

namespace kolmo {

namespace odeint = boost::numeric::odeint;

SparseMatrix KEOperators::generator() const {
    SparseMatrix g = B.mat + C.mat;
    g -= A.mat;
    return g;
}

Eigen::VectorXd KEOperators::apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = -a_diag.cwiseProduct(v);
    if (B.mat.nonZeros()) out += B.mat * v;
    if (C.mat.nonZeros()) out += C.mat * v;
    return out;
}

KEOperators assemble_operators(const BasisSet& basis, const SystemSpec& spec, CAssemblyInfo* info) {
    KEOperators ops;
    ops.A = assemble_A(basis);
    ops.B = assemble_B(basis, spec);
    ops.C = assemble_C(basis, spec, info);
    ops.a_diag = Eigen::VectorXd(ops.A.mat.diagonal());
    return ops;
}

KEOperators make_operators(const Eigen::VectorXd& a_diag, SparseMatrix b, SparseMatrix c) {
    const Eigen::Index n = a_diag.size();
    if (b.rows() == 0) b.resize(n, n);
    if (c.rows() == 0) c.resize(n, n);
    if (b.rows() != n || b.cols() != n || c.rows() != n || c.cols() != n)
        throw ConfigError("operator dimensions differ");
    KEOperators ops;
    ops.a_diag = a_diag;
    ops.A.mat = SparseMatrix(n, n);
    ops.A.mat.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Eigen::Index i = 0; i < n; ++i) ops.A.mat.insert(i, i) = a_diag(i);
    ops.A.mat.makeCompressed();
    ops.A.kind = OperatorKind::diagonal;
    ops.B = {std::move(b), OperatorKind::skew};
    ops.C = {std::move(c), OperatorKind::skew};
    return ops;
}

namespace {

void check_state(const KEState& s, const KEOperators& ops) {
    if (s.psi.size() != ops.dim()) throw ConfigError("state and operators live on different bases");
    if (!s.finite()) throw NumericalError("state has non-finite entries");
}

}  // namespace

std::vector<KEState> evolve_reference(const KEState& psi0, const KEOperators& ops, std::span<const double> times,
                                      const ReferenceOptions& opt) {
    check_state(psi0, ops);
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < psi0.t || (k && times[k] < times[k - 1]))
            throw ConfigError("sample times must be non-decreasing and not before the initial time");
    }
    using State = std::vector<double>;
    const auto n = psi0.psi.size();
    auto rhs = [&ops, n](const State& x, State& dxdt, double) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
        Eigen::Map<Eigen::VectorXd>(dxdt.data(), n) = ops.apply(xv);
    };

    std::vector<KEState> out;
    out.reserve(times.size());
    State x(psi0.psi.data(), psi0.psi.data() + n);
    std::size_t next = 0;
    while (next < times.size() && times[next] == psi0.t) out.push_back({psi0.psi, psi0.t}), ++next;
    if (next == times.size()) return out;

    auto stepper = odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<State>());
    const double t_end = times.back();
    stepper.initialize(x, psi0.t, std::min(opt.initial_step, t_end - psi0.t));
    const double floor = opt.min_step * std::max(1.0, t_end);
    State tmp(n);
    while (next < times.size()) {
        stepper.do_step(rhs);
        if (stepper.current_time_step() < floor && stepper.current_time() < t_end)
            throw NumericalError("reference integrator step underflow at t = " + std::to_string(stepper.current_time()));
        while (next < times.size() && times[next] <= stepper.current_time()) {
            stepper.calc_state(times[next], tmp);
            KEState s{Eigen::Map<Eigen::VectorXd>(tmp.data(), n), times[next]};
            if (!s.finite()) throw NumericalError("non-finite state at t = " + std::to_string(times[next]));
            out.push_back(std::move(s));
            ++next;
        }
    }
    return out;
}

KEState evolve_reference(const KEState& psi0, const KEOperators& ops, double t, const ReferenceOptions& opt) {
    const double ts[] = {t};
    return evolve_reference(psi0, ops, ts, opt).front();
}

Eigen::VectorXd expv(double t, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                     const Eigen::VectorXd& v, const KrylovOptions& opt) {
    const Eigen::Index n = v.size();
    if (t == 0.0 || n == 0 || v.norm() == 0.0) return v;
    if (t < 0.0) throw ConfigError("expv expects t >= 0; negate the operator instead");
    const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.dim, n));

    Eigen::VectorXd w = v;
    double t_now = 0.0;
    double dt = t;
    int substeps = 0;
    Eigen::MatrixXd V(n, m_max + 1);
    while (t_now < t) {
        if (++substeps > opt.max_substeps) throw NumericalError("Krylov exponential did not converge");
        const double beta = w.norm();
        if (beta == 0.0) break;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m_max + 1, m_max + 1);
        V.col(0) = w / beta;
        int m = m_max;
        bool happy = false;
        double hscale = 0.0;
        for (int j = 0; j < m_max; ++j) {
            Eigen::VectorXd p = apply(V.col(j));
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (int i = 0; i <= j; ++i) {
                    const double c = V.col(i).dot(p);
                    H(i, j) += c;
                    p -= c * V.col(i);
                }
            }
            hscale = std::max(hscale, H.col(j).head(j + 1).cwiseAbs().maxCoeff());
            const double h = p.norm();
            if (h <= 1e-14 * std::max(1.0, hscale)) {
                m = j + 1;
                happy = true;
                break;
            }
            H(j + 1, j) = h;
            V.col(j + 1) = p / h;
        }
        dt = std::min(dt, t - t_now);
        if (happy) {
            dt = t - t_now;
            const Eigen::MatrixXd F = (dt * H.topLeftCorner(m, m)).exp();
            w = beta * V.leftCols(m) * F.col(0);
            t_now = t;
            break;
        }
        // exp of the (m+1)-square Hessenberg with its subdiagonal corner: entry (m, 0)
        // is the local error of the m-term approximation.
        Eigen::MatrixXd F;
        double err = 0.0;
        for (int tries = 0;; ++tries) {
            F = (dt * H).exp();
            err = beta * std::abs(F(m, 0));
            if (err <= opt.tol * beta * dt / t) break;
            if (tries > 60) throw NumericalError("Krylov exponential step size underflow");
            dt *= 0.5;
        }
        w = beta * V * F.col(0);
        t_now += dt;
        if (err < 0.01 * opt.tol * beta * dt / t) dt *= 2.0;
        if (!w.allFinite()) throw NumericalError("Krylov exponential produced non-finite values");
    }
    return w;
}

Eigen::VectorXd expv(double t, const SparseMatrix& m, const Eigen::VectorXd& v, const KrylovOptions& opt) {
    if (m.rows() != m.cols() || m.cols() != v.size()) throw ConfigError("expv dimension mismatch");
    return expv(t, [&m](const Eigen::VectorXd& x) -> Eigen::VectorXd { return m * x; }, v, opt);
}

KEState evolve_krylov(const KEState& psi0, const KEOperators& ops, double t, const KrylovOptions& opt) {
    check_state(psi0, ops);
    auto apply = [&ops](const Eigen::VectorXd& x) { return ops.apply(x); };
    return {expv(t - psi0.t, apply, psi0.psi, opt), t};
}

KEState evolve_dense(const KEState& psi0, const KEOperators& ops, double t) {
    check_state(psi0, ops);
    if (t < psi0.t) throw ConfigError("target time precedes the initial state");
    if (ops.dim() > kDenseExpLimit)
        throw ResourceError("dense exponential requested for dimension " + std::to_string(ops.dim()));
    const Eigen::MatrixXd g = (t - psi0.t) * Eigen::MatrixXd(ops.generator());
    return {g.exp() * psi0.psi, t};
}

namespace {

// exp(tau M) for a skew block, dense when small.
class SkewPropagator {
public:
    SkewPropagator(const SparseMatrix& m, double tau) : m_(m), tau_(tau) {
        empty_ = m.nonZeros() == 0;
        if (!empty_ && m.rows() <= kDenseExpLimit) dense_ = (tau * Eigen::MatrixXd(m)).exp();
    }
    void apply(Eigen::VectorXd& v) const {
        if (empty_) return;
        if (dense_.size()) {
            v = dense_ * v;
        } else {
            v = expv(tau_, m_, v);
        }
    }

private:
    const SparseMatrix& m_;
    double tau_;
    bool empty_ = true;
    Eigen::MatrixXd dense_;
};

}  // namespace

std::vector<KEState> trotter_trajectory(const KEState& psi0, const KEOperators& ops, double t, unsigned ell) {
    check_state(psi0, ops);
    if (ell == 0) throw ConfigError("Trotter step count must be at least 1");
    if (t < psi0.t) throw ConfigError("Trotter target time precedes the initial time");
    const double tau = (t - psi0.t) / ell;
    const SkewPropagator eb(ops.B.mat, tau), ec(ops.C.mat, tau);
    const Eigen::VectorXd ea = (-tau * ops.a_diag).array().exp().matrix();

    std::vector<KEState> traj;
    traj.reserve(ell + 1);
    traj.push_back(psi0);
    Eigen::VectorXd v = psi0.psi;
    for (unsigned k = 1; k <= ell; ++k) {
        ec.apply(v);
        eb.apply(v);
        v = ea.cwiseProduct(v);
        if (!v.allFinite()) throw NumericalError("Trotter step produced non-finite values");
        traj.push_back({v, psi0.t + k * tau});
    }
    return traj;
}

KEState evolve_trotter(const KEState& psi0, const KEOperators& ops, double t, unsigned ell) {
    return trotter_trajectory(psi0, ops, t, ell).back();
}

double trotter_bound(double t, unsigned ell, double R, unsigned K, const SystemSpec& spec, double norm0) {
    const double g = spec.gamma();
    return t * t / ell * (R * R + spec.J1 * spec.J1 * K * K * spec.kappa() + g * g * R) * norm0;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericalError("log-log fit on non-positive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

TrotterStudy trotter_convergence(const KEState& psi0, const KEOperators& ops, double t, std::span<const unsigned> steps,
                                 const BasisSet* basis, const SystemSpec* spec) {
    ReferenceOptions tight;
    tight.rtol = 1e-11;
    const KEState ref = evolve_reference(psi0, ops, t, tight);
    TrotterStudy st;
    std::vector<double> ells;
    for (unsigned ell : steps) {
        const KEState s = evolve_trotter(psi0, ops, t, ell);
        st.steps.push_back(ell);
        st.errors.push_back((s.psi - ref.psi).norm());
        ells.push_back(ell);
        if (basis && spec && spec->bounded())
            st.bounds.push_back(trotter_bound(t - psi0.t, ell, basis->scheme().R, basis->max_order(), *spec, psi0.norm()));
    }
    st.slope = -loglog_slope(ells, st.errors);
    return st;
}

Eigen::VectorXd embed(const Eigen::VectorXd& v, const BasisSet& from, const BasisSet& to) {
    if (v.size() != static_cast<Eigen::Index>(from.size())) throw ConfigError("vector does not match its basis");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(to.size()));
    for (std::size_t p = 0; p < from.size(); ++p) {
        auto q = to.find(from[p]);
        if (!q) throw ConfigError("basis " + from[p].to_string() + " is not contained in the target basis");
        out(static_cast<Eigen::Index>(*q)) = v(static_cast<Eigen::Index>(p));
    }
    return out;
}

Eigen::VectorXd restrict_to(const Eigen::VectorXd& v, const BasisSet& from, const BasisSet& to) {
    if (v.size() != static_cast<Eigen::Index>(from.size())) throw ConfigError("vector does not match its basis");
    Eigen::VectorXd out(static_cast<Eigen::Index>(to.size()));
    for (std::size_t p = 0; p < to.size(); ++p) {
        auto q = from.find(to[p]);
        if (!q) throw ConfigError("basis " + to[p].to_string() + " is not contained in the source basis");
        out(static_cast<Eigen::Index>(p)) = v(static_cast<Eigen::Index>(*q));
    }
    return out;
}

RegularizationReport regularization_gap(const SystemSpec& spec,
                                        const std::function<Eigen::VectorXd(const BasisSet&)>& initial, double t,
                                        double r_small, double r_large, unsigned samples) {
    RegularizationReport rep;
    rep.r_small = r_small;
    rep.r_large = r_large;
    if (!spec.bounded()) {
        rep.applicable = false;
        rep.status = "not applicable (J = inf): the drift is not relatively bounded";
        return rep;
    }
    if (!(r_small > 0.0) || r_large < r_small) throw ConfigError("need 0 < r_small <= r_large");
    if (samples < 2 || !(t > 0.0)) throw ConfigError("need t > 0 and at least two samples");

    const auto small = enumerate_basis(spec.dim(), RegularizationScheme::total_order(r_small, spec.rates), spec.rates);
    const auto large = enumerate_basis(spec.dim(), RegularizationScheme::total_order(r_large, spec.rates), spec.rates);
    rep.K_small = small.max_order();
    rep.K_large = large.max_order();

    const Eigen::VectorXd psi0 = initial(large);
    rep.norm0_sq = psi0.squaredNorm();
    const Eigen::VectorXd phi0 = restrict_to(psi0, large, small);

    std::vector<double> times(samples);
    for (unsigned k = 0; k < samples; ++k) times[k] = t * k / (samples - 1);
    const auto ops_l = assemble_operators(large, spec);
    const auto ops_s = assemble_operators(small, spec);
    const auto ref = evolve_reference({psi0, 0.0}, ops_l, times);
    const auto phi = evolve_reference({phi0, 0.0}, ops_s, times);
    for (unsigned k = 0; k < samples; ++k) {
        const double gap = (ref[k].psi - embed(phi[k].psi, small, large)).squaredNorm();
        if (gap > rep.measured) rep.measured = gap, rep.t_at_sup = times[k];
    }
    const double g = spec.gamma();
    rep.bound = 3.0 * g * g / (2.0 * r_small) * rep.norm0_sq;
    rep.pass = rep.measured <= rep.bound;
    rep.status = rep.pass ? "pass" : "fail";
    return rep;
}

std::vector<SmoothingRow> smoothing_bound_audit(const KEOperators& ops, const SystemSpec& spec,
                                                std::span<const double> times) {
    std::vector<SmoothingRow> rows;
    const double kappa = spec.kappa();
    const bool c_app = spec.bounded() && ops.C.mat.nonZeros() > 0;
    for (double t : times) {
        if (!(t > 0.0)) throw ConfigError("smoothing audit needs t > 0");
        SmoothingRow r;
        r.t = t;
        const Eigen::VectorXd decay = (-t * ops.a_diag).array().exp().matrix();
        // A^{1/2} e^{-tA} is diagonal, so its norm is the largest entry.
        r.a_norm = ops.a_diag.size() ? (ops.a_diag.array().sqrt() * decay.array()).maxCoeff() : 0.0;
        r.a_bound = 0.5 * std::sqrt(kappa / t);
        r.a_ok = r.a_norm <= r.a_bound;
        r.c_applicable = c_app;
        r.c_bound = c_app ? 0.5 * spec.gamma() * std::sqrt(kappa / t) : std::numeric_limits<double>::infinity();
        if (ops.C.mat.nonZeros()) {
            const SparseMatrix& c = ops.C.mat;
            auto fwd = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return c * decay.cwiseProduct(v); };
            auto adj = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
                return decay.cwiseProduct(c.transpose() * v);
            };
            r.c_norm = power_norm(fwd, adj, ops.dim());
        } else {
            r.c_norm = 0.0;
        }
        r.c_ok = !c_app || r.c_norm <= r.c_bound;
        rows.push_back(r);
    }
    return rows;
}

namespace {
// Sparse label "var:order" pairs separated by spaces; safe inside a CSV field.
std::string csv_label(const MultiIndex& m) {
    std::string s;
    for (const auto& e : m.entries()) {
        if (!s.empty()) s += ' ';
        s += std::to_string(e.var) + ':' + std::to_string(e.order);
    }
    return s.empty() ? "0" : s;
}
}  // namespace

void write_trajectory_csv(std::ostream& out, const BasisSet& basis, std::span<const KEState> traj) {
    out << "t,coordinate,value\n";
    out.precision(17);
    for (const auto& s : traj) {
        if (s.psi.size() != static_cast<Eigen::Index>(basis.size())) throw ConfigError("trajectory basis mismatch");
        for (std::size_t p = 0; p < basis.size(); ++p)
            out << s.t << ',' << csv_label(basis[p]) << ',' << s.psi(static_cast<Eigen::Index>(p)) << '\n';
    }
}

}  // namespace kolmo
