#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace nn {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

// Default-initializes elements instead of value-initializing them, so buffers
// created through Tensor::uninitialized() skip the zero fill that a normal
// std::vector resize would do. Zero-filling multi-megabyte activation and
// gradient buffers that the kernels immediately overwrite is pure overhead.
template <class T>
struct uninit_allocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = uninit_allocator<U>;
    };

    template <class U>
    void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

}  // namespace detail

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

// Dense n-dimensional array, row-major. All dimension sizes must be positive.
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

    Tensor(std::vector<int> shape, std::vector<T> data) : shape_(std::move(shape)) {
        if (checked_size(shape_) != static_cast<int64_t>(data.size()))
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape_));
        data_.assign(data.begin(), data.end());
    }

    // Allocates without zero-filling; every element must be written before use.
    static Tensor uninitialized(std::vector<int> shape) {
        Tensor t;
        const int64_t n = checked_size(shape);
        t.shape_ = std::move(shape);
        t.data_.resize(static_cast<size_t>(n));
        return t;
    }

    static Tensor full(std::vector<int> shape, T v) {
        Tensor t = uninitialized(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    const std::vector<int>& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Convenience accessors for the common ranks; index arithmetic in hot
    // kernels is done manually on raw pointers instead.
    T& at(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
    const T& at(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }

    T& at(int n, int h, int w, int c) {
        return data_[((static_cast<size_t>(n) * dim(1) + h) * dim(2) + w) * dim(3) + c];
    }
    const T& at(int n, int h, int w, int c) const {
        return data_[((static_cast<size_t>(n) * dim(1) + h) * dim(2) + w) * dim(3) + c];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    // Row-major reshape; total size must be preserved.
    Tensor reshaped(std::vector<int> shape) const {
        if (checked_size(shape) != size())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out = Tensor<U>::uninitialized(shape_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
        return out;
    }

    static int64_t checked_size(const std::vector<int>& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
            n *= d;
        }
        return n;
    }

private:
    std::vector<int> shape_;
    std::vector<T, detail::uninit_allocator<T>> data_;
};

using Tensor64 = Tensor<double>;
using Tensor32 = Tensor<float>;

// Batch/height/width/channels, the layout every image kernel uses.
struct Shape4 {
    int n = 0, h = 0, w = 0, c = 0;
};

template <class T>
Shape4 as_shape4(const Tensor<T>& t, const char* what) {
    if (t.ndim() != 4)
        throw ShapeError(std::string(what) + ": expected a 4-d (N,H,W,C) tensor, got " +
                         shape_str(t.shape()));
    return Shape4{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

}  // namespace nn
