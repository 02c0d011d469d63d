#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdrn {

struct Shape {
    std::int64_t b = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    bool operator==(const Shape& o) const = default;
    std::int64_t size() const { return b * c * h * w; }

    std::string str() const {
        std::ostringstream os;
        os << "(" << b << ", " << c << ", " << h << ", " << w << ")";
        return os.str();
    }
};

/// Dense 4-D array with (batch, channel, height, width) layout, row-major.
/// Images are stored normalized to [0,1]; feature maps are unbounded.
template <class T>
class Tensor {
public:
    Tensor() = default;

    Tensor(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w, T fill = T(0))
        : shape_{b, c, h, w}, data_(static_cast<std::size_t>(check_dims(b, c, h, w)), fill) {}

    explicit Tensor(Shape s, T fill = T(0)) : Tensor(s.b, s.c, s.h, s.w, fill) {}

    static Tensor scalar(T v) {
        Tensor t(1, 1, 1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

    const Shape& shape() const { return shape_; }
    std::int64_t b() const { return shape_.b; }
    std::int64_t c() const { return shape_.c; }
    std::int64_t h() const { return shape_.h; }
    std::int64_t w() const { return shape_.w; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    std::int64_t index(std::int64_t ib, std::int64_t ic, std::int64_t iy, std::int64_t ix) const {
        return ((ib * shape_.c + ic) * shape_.h + iy) * shape_.w + ix;
    }

    T& at(std::int64_t ib, std::int64_t ic, std::int64_t iy, std::int64_t ix) {
        return data_[static_cast<std::size_t>(index(ib, ic, iy, ix))];
    }
    const T& at(std::int64_t ib, std::int64_t ic, std::int64_t iy, std::int64_t ix) const {
        return data_[static_cast<std::size_t>(index(ib, ic, iy, ix))];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    T item() const {
        if (size() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar, shape " + shape_.str());
        return data_[0];
    }

private:
    static std::int64_t check_dims(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) {
        if (b < 1 || c < 1 || h < 1 || w < 1) {
            throw std::invalid_argument("Tensor: all dimensions must be >= 1, got (" + std::to_string(b) + ", " +
                                        std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")");
        }
        return b * c * h * w;
    }

    Shape shape_{};
    std::vector<T> data_;
};

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor +: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> r = a;
    for (std::int64_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor -: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> r = a;
    for (std::int64_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

template <class T>
Tensor<T> operator*(const Tensor<T>& a, T k) {
    Tensor<T> r = a;
    for (std::int64_t i = 0; i < r.size(); ++i) r[i] *= k;
    return r;
}

template <class T>
Tensor<T> clamp01(const Tensor<T>& a) {
    Tensor<T> r = a;
    for (std::int64_t i = 0; i < r.size(); ++i) r[i] = std::clamp(r[i], T(0), T(1));
    return r;
}

template <class T>
double mean(const Tensor<T>& a) {
    double s = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]);
    return s / static_cast<double>(a.size());
}

template <class T>
double stddev(const Tensor<T>& a) {
    const double mu = mean(a);
    double s = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - mu;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.size()));
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace mdrn
