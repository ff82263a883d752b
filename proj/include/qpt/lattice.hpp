#pragma once

// Integer lattices Z^m, boxes, dense lattice series and Fourier coefficient
// vectors. Every matrix in the library is laid out in the ordering defined
// here: mode-major, then lexicographic over the box (first component most
// significant).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpt {

/// Coefficients with magnitude below this are stored as exact zeros.
inline constexpr double kFlushToZero = 1e-300;

class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(int dim) : c_(static_cast<std::size_t>(dim), 0) {}
    MultiIndex(std::initializer_list<int> init) : c_(init) {}
    explicit MultiIndex(std::vector<int> c) : c_(std::move(c)) {}

    static MultiIndex unit(int dim, int axis) {
        MultiIndex e(dim);
        e.c_.at(static_cast<std::size_t>(axis)) = 1;
        return e;
    }

    int dim() const { return static_cast<int>(c_.size()); }
    int operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
    int& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& components() const { return c_; }

    int l1() const {
        int s = 0;
        for (int v : c_) s += std::abs(v);
        return s;
    }
    int linf() const {
        int s = 0;
        for (int v : c_) s = std::max(s, std::abs(v));
        return s;
    }

    MultiIndex operator-() const {
        MultiIndex r(*this);
        for (int& v : r.c_) v = -v;
        return r;
    }
    MultiIndex operator+(const MultiIndex& o) const {
        check_dim(o);
        MultiIndex r(*this);
        for (std::size_t i = 0; i < c_.size(); ++i) r.c_[i] += o.c_[i];
        return r;
    }
    MultiIndex operator-(const MultiIndex& o) const { return *this + (-o); }

    double dot(std::span<const double> w) const {
        if (w.size() != c_.size()) throw std::invalid_argument("MultiIndex::dot: dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < c_.size(); ++i) s += c_[i] * w[i];
        return s;
    }

    bool is_zero() const {
        return std::all_of(c_.begin(), c_.end(), [](int v) { return v == 0; });
    }

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < c_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(c_[i]);
        }
        return s + ")";
    }

private:
    void check_dim(const MultiIndex& o) const {
        if (o.c_.size() != c_.size()) throw std::invalid_argument("MultiIndex: dimension mismatch");
    }
    std::vector<int> c_;
};

/// Cube center + Λ_N with |k - center|_∞ ≤ N.
struct Box {
    MultiIndex center;
    int radius = 0;

    Box() = default;
    Box(MultiIndex c, int r) : center(std::move(c)), radius(r) {
        if (r < 0) throw std::invalid_argument("Box: negative radius");
    }
    static Box centered(int dim, int r) { return Box(MultiIndex(dim), r); }

    int dim() const { return center.dim(); }
    int side() const { return 2 * radius + 1; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < dim(); ++i) s *= static_cast<std::size_t>(side());
        return s;
    }
    bool contains(const MultiIndex& k) const {
        if (k.dim() != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (std::abs(k[i] - center[i]) > radius) return false;
        return true;
    }
    /// Lexicographic position of k inside the box; k must be a member.
    std::size_t index_of(const MultiIndex& k) const {
        std::size_t idx = 0;
        for (int i = 0; i < dim(); ++i)
            idx = idx * static_cast<std::size_t>(side()) + static_cast<std::size_t>(k[i] - center[i] + radius);
        return idx;
    }
    MultiIndex at(std::size_t linear) const {
        MultiIndex k(dim());
        for (int i = dim() - 1; i >= 0; --i) {
            k[i] = static_cast<int>(linear % static_cast<std::size_t>(side())) - radius + center[i];
            linear /= static_cast<std::size_t>(side());
        }
        return k;
    }
};

/// All members of the box in lexicographic order; length (2N+1)^m.
inline std::vector<MultiIndex> enumerate_box(const Box& box) {
    std::vector<MultiIndex> out;
    out.reserve(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) out.push_back(box.at(i));
    return out;
}

/// Scalar series on Z^m stored densely on Λ_R (centered at the origin).
class LatticeSeries {
public:
    LatticeSeries() = default;
    LatticeSeries(int dim, int radius) : box_(Box::centered(dim, radius)), v_(box_.size(), 0.0) {}

    static LatticeSeries delta(const MultiIndex& k, double value = 1.0) {
        LatticeSeries s(k.dim(), k.linf());
        s.ref(k) = value;
        return s;
    }

    int dim() const { return box_.dim(); }
    int radius() const { return box_.radius; }
    const Box& box() const { return box_; }
    std::size_t size() const { return v_.size(); }

    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }

    double at(const MultiIndex& k) const { return box_.contains(k) ? v_[box_.index_of(k)] : 0.0; }
    double& ref(const MultiIndex& k) {
        if (!box_.contains(k)) throw std::out_of_range("LatticeSeries: index " + k.str() + " outside support");
        return v_[box_.index_of(k)];
    }

    /// k -> -k; an involution.
    LatticeSeries reflected() const {
        LatticeSeries r(dim(), radius());
        std::reverse_copy(v_.begin(), v_.end(), r.v_.begin());
        return r;
    }

    /// Same coefficients on Λ_r: zero padded or truncated.
    LatticeSeries resized(int r) const {
        LatticeSeries out(dim(), r);
        const int common = std::min(r, radius());
        Box inner = Box::centered(dim(), common);
        for (std::size_t i = 0; i < inner.size(); ++i) {
            MultiIndex k = inner.at(i);
            out.v_[out.box_.index_of(k)] = v_[box_.index_of(k)];
        }
        return out;
    }

    double l2() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return std::sqrt(s);
    }

    void flush_denormals() {
        for (double& x : v_)
            if (std::abs(x) < kFlushToZero) x = 0.0;
    }

    LatticeSeries& operator+=(const LatticeSeries& o) {
        if (o.dim() != dim()) throw std::invalid_argument("LatticeSeries: dimension mismatch");
        if (o.radius() > radius()) *this = resized(o.radius());
        if (o.radius() == radius()) {
            for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        } else {
            for (std::size_t i = 0; i < o.size(); ++i) v_[box_.index_of(o.box_.at(i))] += o.v_[i];
        }
        return *this;
    }
    LatticeSeries& operator*=(double f) {
        for (double& x : v_) x *= f;
        return *this;
    }

private:
    Box box_{Box::centered(1, 0)};
    std::vector<double> v_ = std::vector<double>(1, 0.0);
};

namespace detail {
// Linear position of k in Λ_R expressed as Σ k_i s_i + offset, so that
// index(k + k') = Σ k_i s_i + index(k').
inline std::vector<std::ptrdiff_t> strides(int dim, int radius) {
    std::vector<std::ptrdiff_t> s(static_cast<std::size_t>(dim));
    std::ptrdiff_t acc = 1;
    for (int i = dim - 1; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = acc;
        acc *= 2 * radius + 1;
    }
    return s;
}
}  // namespace detail

/// c(k) = Σ_{k'} a(σ_a k') b(σ_b (k - k')), σ = identity or negation.
/// Support radius of the result is radius(a) + radius(b).
inline LatticeSeries convolve(const LatticeSeries& a_in, const LatticeSeries& b_in, bool reflect_a = false,
                              bool reflect_b = false) {
    if (a_in.dim() != b_in.dim()) throw std::invalid_argument("convolve: dimension mismatch");
    const LatticeSeries a = reflect_a ? a_in.reflected() : a_in;
    const LatticeSeries b = reflect_b ? b_in.reflected() : b_in;
    const int dim = a.dim();
    LatticeSeries c(dim, a.radius() + b.radius());
    const auto sc = detail::strides(dim, c.radius());

    // Iterate the sparser operand in the outer loop.
    const bool a_outer = std::count_if(a.values().begin(), a.values().end(), [](double x) { return x != 0.0; }) <=
                         std::count_if(b.values().begin(), b.values().end(), [](double x) { return x != 0.0; });
    const LatticeSeries& outer = a_outer ? a : b;
    const LatticeSeries& inner = a_outer ? b : a;

    std::vector<std::ptrdiff_t> inner_pos(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) {
        MultiIndex k = inner.box().at(i);
        inner_pos[i] = static_cast<std::ptrdiff_t>(c.box().index_of(k));
    }
    auto out = c.values();
    auto iv = inner.values();
    auto ov = outer.values();
    for (std::size_t i = 0; i < outer.size(); ++i) {
        const double x = ov[i];
        if (x == 0.0) continue;
        MultiIndex k = outer.box().at(i);
        std::ptrdiff_t shift = 0;
        for (int d = 0; d < dim; ++d) shift += k[d] * sc[static_cast<std::size_t>(d)];
        for (std::size_t j = 0; j < iv.size(); ++j) {
            const double y = iv[j];
            if (y != 0.0) out[static_cast<std::size_t>(shift + inner_pos[j])] += x * y;
        }
    }
    c.flush_denormals();
    return c;
}

/// A (mode, lattice index) pair; modes are 0-based.
struct SiteIndex {
    int mode = 0;
    MultiIndex index;
    friend bool operator==(const SiteIndex&, const SiteIndex&) = default;
    friend auto operator<=>(const SiteIndex&, const SiteIndex&) = default;
};

/// Real Fourier coefficients ẑ_j(k), j < n, supported on Λ_R.
class FourierVector {
public:
    FourierVector() = default;
    FourierVector(int modes, int dim, int radius) : modes_(static_cast<std::size_t>(modes), LatticeSeries(dim, radius)) {
        if (modes < 1) throw std::invalid_argument("FourierVector: need at least one mode");
    }

    int modes() const { return static_cast<int>(modes_.size()); }
    int dim() const { return modes_.empty() ? 0 : modes_.front().dim(); }
    int radius() const { return modes_.empty() ? 0 : modes_.front().radius(); }
    Box support() const { return Box::centered(dim(), radius()); }
    std::size_t sites() const { return modes_.empty() ? 0 : modes_.size() * modes_.front().size(); }

    const LatticeSeries& mode(int j) const { return modes_.at(static_cast<std::size_t>(j)); }
    LatticeSeries& mode(int j) { return modes_.at(static_cast<std::size_t>(j)); }

    double at(int j, const MultiIndex& k) const { return mode(j).at(k); }
    void set(int j, const MultiIndex& k, double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("FourierVector: non-finite coefficient");
        mode(j).ref(k) = std::abs(v) < kFlushToZero ? 0.0 : v;
    }

    /// (Σ_k ‖ẑ(k)‖²)^{1/2}
    double norm2() const {
        double s = 0.0;
        for (const auto& m : modes_)
            for (double x : m.values()) s += x * x;
        return std::sqrt(s);
    }

    /// Euclidean norm over modes of the coefficient block at k.
    double block_norm(const MultiIndex& k) const {
        double s = 0.0;
        for (const auto& m : modes_) {
            const double x = m.at(k);
            s += x * x;
        }
        return std::sqrt(s);
    }

    FourierVector resized(int r) const {
        FourierVector out;
        out.modes_.reserve(modes_.size());
        for (const auto& m : modes_) out.modes_.push_back(m.resized(r));
        return out;
    }

    bool is_zero() const {
        for (const auto& m : modes_)
            for (double x : m.values())
                if (x != 0.0) return false;
        return true;
    }

    FourierVector& operator+=(const FourierVector& o) {
        check_compatible(o);
        const int r = std::max(radius(), o.radius());
        if (r > radius()) *this = resized(r);
        for (std::size_t j = 0; j < modes_.size(); ++j) modes_[j] += o.modes_[j];
        return *this;
    }
    FourierVector& operator-=(const FourierVector& o) {
        FourierVector neg = o;
        neg *= -1.0;
        return *this += neg;
    }
    FourierVector& operator*=(double f) {
        for (auto& m : modes_) m *= f;
        return *this;
    }
    friend FourierVector operator-(FourierVector a, const FourierVector& b) { return a -= b; }
    friend FourierVector operator+(FourierVector a, const FourierVector& b) { return a += b; }

private:
    void check_compatible(const FourierVector& o) const {
        if (o.modes() != modes() || o.dim() != dim())
            throw std::invalid_argument("FourierVector: incompatible shapes");
    }
    std::vector<LatticeSeries> modes_;
};

/// P_box: keep coefficients inside the box, zero the rest.
inline FourierVector project(const FourierVector& v, const Box& box) {
    if (box.dim() != v.dim()) throw std::invalid_argument("project: dimension mismatch");
    FourierVector out = v;
    const Box sup = v.support();
    for (int j = 0; j < v.modes(); ++j) {
        auto vals = out.mode(j).values();
        for (std::size_t i = 0; i < vals.size(); ++i)
            if (!box.contains(sup.at(i))) vals[i] = 0.0;
    }
    return out;
}

/// log of sup_k ‖ẑ(k)‖ exp{|k|^s}; -inf for the zero vector.
inline double gevrey_log_sup(const FourierVector& v, double s) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("gevrey: exponent must lie in (0,1)");
    double best = -std::numeric_limits<double>::infinity();
    const Box sup = v.support();
    for (std::size_t i = 0; i < sup.size(); ++i) {
        double big = 0.0;
        for (int j = 0; j < v.modes(); ++j) big = std::max(big, std::abs(v.mode(j).values()[i]));
        if (big == 0.0) continue;
        double sq = 0.0;
        for (int j = 0; j < v.modes(); ++j) {
            const double x = v.mode(j).values()[i] / big;
            sq += x * x;
        }
        const double k1 = sup.at(i).l1();
        best = std::max(best, std::log(big) + 0.5 * std::log(sq) + std::pow(k1, s));
    }
    return best;
}

/// sup_k ‖ẑ(k)‖ exp{|k|^s}; +inf when the value leaves the double range.
inline double gevrey_sup(const FourierVector& v, double s) {
    const double l = gevrey_log_sup(v, s);
    if (l > std::log(std::numeric_limits<double>::max())) return std::numeric_limits<double>::infinity();
    return std::exp(l);
}

/// Largest s on {0.05, ..., 0.95} with gevrey_sup(v, s) ≤ 1, else 0.
/// A relative slack of 1e-12 absorbs rounding when the bound is attained exactly.
inline double gevrey_fit(const FourierVector& v) {
    for (int i = 19; i >= 1; --i) {
        const double s = 0.05 * i;
        if (gevrey_log_sup(v, s) <= 1e-12) return s;
    }
    return 0.0;
}

}  // namespace qpt
