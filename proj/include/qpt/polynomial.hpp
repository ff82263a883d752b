#pragma once

// Real-coefficient polynomials in (z, z̄) and their evaluation on Fourier
// series via iterated lattice convolution.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpt/lattice.hpp"

namespace qpt {

struct Monomial {
    double coeff = 0.0;
    std::vector<int> p;  // exponents of z
    std::vector<int> q;  // exponents of z̄

    int degree() const {
        int d = 0;
        for (int e : p) d += e;
        for (int e : q) d += e;
        return d;
    }
};

class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int n) : n_(n) {
        if (n < 1) throw std::invalid_argument("Polynomial: need at least one variable pair");
    }
    Polynomial(int n, std::vector<Monomial> terms) : n_(n) {
        for (auto& t : terms) add(std::move(t));
        canonicalize();
    }

    int n() const { return n_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    int degree() const {
        int d = 0;
        for (const auto& t : terms_) d = std::max(d, t.degree());
        return d;
    }

    /// Coefficient of the monomial z^p z̄^q (0 when absent).
    double coefficient(const std::vector<int>& p, const std::vector<int>& q) const {
        for (const auto& t : terms_)
            if (t.p == p && t.q == q) return t.coeff;
        return 0.0;
    }

    Polynomial& add(Monomial t) {
        if (static_cast<int>(t.p.size()) != n_ || static_cast<int>(t.q.size()) != n_)
            throw std::invalid_argument("Polynomial: exponent vector length mismatch");
        for (int e : t.p)
            if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
        for (int e : t.q)
            if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
        if (!std::isfinite(t.coeff)) throw std::invalid_argument("Polynomial: non-finite coefficient");
        terms_.push_back(std::move(t));
        return *this;
    }

    /// Merge equal exponent pairs, drop terms below 1e-14 of the largest, sort.
    Polynomial& canonicalize() {
        std::map<std::pair<std::vector<int>, std::vector<int>>, double> acc;
        for (const auto& t : terms_) acc[{t.p, t.q}] += t.coeff;
        double cmax = 0.0;
        for (const auto& [key, c] : acc) cmax = std::max(cmax, std::abs(c));
        terms_.clear();
        for (const auto& [key, c] : acc)
            if (c != 0.0 && std::abs(c) >= 1e-14 * cmax) terms_.push_back({c, key.first, key.second});
        return *this;
    }

    Polynomial& operator+=(const Polynomial& o) {
        if (o.n_ != n_) throw std::invalid_argument("Polynomial: variable count mismatch");
        for (const auto& t : o.terms_) terms_.push_back(t);
        return canonicalize();
    }
    Polynomial& operator*=(double f) {
        for (auto& t : terms_) t.coeff *= f;
        return canonicalize();
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.n_ != b.n_) throw std::invalid_argument("Polynomial: variable count mismatch");
        Polynomial r(a.n_);
        for (const auto& s : a.terms_)
            for (const auto& t : b.terms_) {
                Monomial u{s.coeff * t.coeff, s.p, s.q};
                for (int i = 0; i < a.n_; ++i) {
                    u.p[static_cast<std::size_t>(i)] += t.p[static_cast<std::size_t>(i)];
                    u.q[static_cast<std::size_t>(i)] += t.q[static_cast<std::size_t>(i)];
                }
                r.terms_.push_back(std::move(u));
            }
        return r.canonicalize();
    }

    Polynomial pow(int e) const {
        if (e < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
        Polynomial r = constant(n_, 1.0);
        for (int i = 0; i < e; ++i) r = r * *this;
        return r;
    }

    static Polynomial constant(int n, double c) {
        Polynomial r(n);
        if (c != 0.0) r.terms_.push_back({c, std::vector<int>(static_cast<std::size_t>(n), 0),
                                           std::vector<int>(static_cast<std::size_t>(n), 0)});
        return r;
    }
    /// c·z_j (conj = false) or c·z̄_j (conj = true); j is 0-based.
    static Polynomial variable(int n, int j, bool conj, double c = 1.0) {
        Polynomial r = constant(n, c);
        auto& t = r.terms_.front();
        (conj ? t.q : t.p).at(static_cast<std::size_t>(j)) = 1;
        return r;
    }

    Polynomial differentiate_z(int j) const { return differentiate(j, false); }
    Polynomial differentiate_zbar(int j) const { return differentiate(j, true); }

    /// Value at (z, w) where w stands in for z̄; pass w = conj(z) for H(z, z̄).
    std::complex<double> evaluate(const std::vector<std::complex<double>>& z,
                                  const std::vector<std::complex<double>>& w) const {
        if (static_cast<int>(z.size()) != n_ || static_cast<int>(w.size()) != n_)
            throw std::invalid_argument("Polynomial::evaluate: length mismatch");
        std::complex<double> s = 0.0;
        for (const auto& t : terms_) {
            std::complex<double> v = t.coeff;
            for (int i = 0; i < n_; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                for (int e = 0; e < t.p[ii]; ++e) v *= z[ii];
                for (int e = 0; e < t.q[ii]; ++e) v *= w[ii];
            }
            s += v;
        }
        return s;
    }
    std::complex<double> evaluate(const std::vector<std::complex<double>>& z) const {
        std::vector<std::complex<double>> w(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::conj(z[i]);
        return evaluate(z, w);
    }

private:
    Polynomial differentiate(int j, bool conj) const {
        if (j < 0 || j >= n_) throw std::out_of_range("Polynomial: variable index out of range");
        Polynomial r(n_);
        for (const auto& t : terms_) {
            const int e = (conj ? t.q : t.p)[static_cast<std::size_t>(j)];
            if (e == 0) continue;
            Monomial u = t;
            u.coeff *= e;
            (conj ? u.q : u.p)[static_cast<std::size_t>(j)] -= 1;
            r.terms_.push_back(std::move(u));
        }
        return r.canonicalize();
    }

    int n_ = 1;
    std::vector<Monomial> terms_;
};

/// Evaluates polynomials on the Fourier series z_i(θ) = Σ ẑ_i(k)e^{i⟨k,θ⟩},
/// z̄_i(θ) = Σ ẑ_i(k)e^{−i⟨k,θ⟩}. Products of factors are cached by exponent,
/// so all polynomials evaluated through one instance share work.
class SeriesEvaluator {
public:
    explicit SeriesEvaluator(const FourierVector& zhat) : n_(zhat.modes()), dim_(zhat.dim()) {
        base_.reserve(static_cast<std::size_t>(2 * n_));
        for (int i = 0; i < n_; ++i) base_.push_back(zhat.mode(i));
        for (int i = 0; i < n_; ++i) base_.push_back(zhat.mode(i).reflected());
    }

    int modes() const { return n_; }

    /// Series of z^p z̄^q.
    const LatticeSeries& product(const std::vector<int>& exps) {
        if (auto it = cache_.find(exps); it != cache_.end()) return it->second;
        std::size_t v = 0;
        while (v < exps.size() && exps[v] == 0) ++v;
        LatticeSeries result;
        if (v == exps.size()) {
            result = LatticeSeries::delta(MultiIndex(dim_), 1.0);
        } else {
            std::vector<int> lower = exps;
            lower[v] -= 1;
            const LatticeSeries prev = product(lower);
            result = convolve(prev, base_[v]);
        }
        return cache_.emplace(exps, std::move(result)).first->second;
    }

    LatticeSeries evaluate(const Polynomial& poly) {
        if (poly.n() != n_) throw std::invalid_argument("SeriesEvaluator: variable count mismatch");
        LatticeSeries out(dim_, 0);
        for (const auto& t : poly.terms()) {
            std::vector<int> exps(t.p);
            exps.insert(exps.end(), t.q.begin(), t.q.end());
            LatticeSeries term = product(exps);
            term *= t.coeff;
            out += term;
        }
        out.flush_denormals();
        return out;
    }

private:
    int n_;
    int dim_;
    std::vector<LatticeSeries> base_;
    std::map<std::vector<int>, LatticeSeries> cache_;
};

}  // namespace qpt
