#include "obda/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace obda {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;

template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    require(a.shape() == b.shape(), ErrorKind::config,
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
void require_rank(const Tensor<T>& a, int rank, const char* op)
{
    require(a.defined() && a.rank() == rank, ErrorKind::config,
            std::string(op) + ": expected rank " + std::to_string(rank) + " tensor");
}

template <typename T>
bool tracks(const detail::Node<T>& self, std::size_t input)
{
    return self.inputs[input]->requires_grad;
}

template <typename T>
T sigmoid(T x)
{
    return T(1) / (T(1) + std::exp(-x));
}

// Unfolds (C,H,W) into (C*k*k, Ho*Wo) patches for a GEMM-based convolution.
template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int pad, int out_h,
            int out_w, T* cols)
{
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    T* dst = row + oy * out_w;
                    if (iy < 0 || iy >= height) {
                        std::fill(dst, dst + out_w, T(0));
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * height + iy) * width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix < 0 || ix >= width) ? T(0) : src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* cols, int channels, int height, int width, int k, int stride, int pad, int out_h,
            int out_w, T* x)
{
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= height) {
                        continue;
                    }
                    T* dst = x + (static_cast<std::size_t>(c) * height + iy) * width;
                    const T* src = row + oy * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < width) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (tracks(self, k)) {
                auto& g = self.inputs[k]->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    }, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "sub");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        if (tracks(self, 0)) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (tracks(self, 1)) {
            auto& g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i];
            }
        }
    }, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        if (tracks(self, 0)) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * bv[i];
            }
        }
        if (tracks(self, 1)) {
            auto& g = self.inputs[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * av[i];
            }
        }
    }, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor)
{
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] * factor;
    }
    return Tensor<T>::from_op(a.shape(), std::move(out), {a}, [factor](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * factor;
        }
    }, "scale");
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x)
{
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] * sigmoid(x[i]);
    }
    return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
        const auto& xv = self.inputs[0]->value;
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T s = sigmoid(xv[i]);
            g[i] += self.grad[i] * s * (T(1) + xv[i] * (T(1) - s));
        }
    }, "silu");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x)
{
    T total = 0;
    for (T v : x.values()) {
        total += v;
    }
    return Tensor<T>::from_op({1}, {total}, {x}, [](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (auto& gi : g) {
            gi += self.grad[0];
        }
    }, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x)
{
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

int conv_output_extent(int extent, int kernel, int stride, int padding)
{
    require(stride > 0 && padding >= 0, ErrorKind::config, "conv2d: stride must be positive, padding non-negative");
    const int span = extent + 2 * padding - kernel;
    require(span >= 0, ErrorKind::config, "conv2d: kernel larger than padded input");
    return span / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride, int padding)
{
    require_rank(x, 3, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    const int c_in = x.dim(0), height = x.dim(1), width = x.dim(2);
    const int c_out = kernel.dim(0), k = kernel.dim(2);
    require(kernel.dim(1) == c_in && kernel.dim(3) == k, ErrorKind::config,
            "conv2d: kernel " + shape_str(kernel.shape()) + " incompatible with input " + shape_str(x.shape()));
    require(!bias.defined() || bias.shape() == Shape{c_out}, ErrorKind::config, "conv2d: bias must have C_out entries");
    const int out_h = conv_output_extent(height, k, stride, padding);
    const int out_w = conv_output_extent(width, k, stride, padding);
    const int plane = out_h * out_w;
    const int patch = c_in * k * k;

    // 1x1/stride-1 convolutions read the input directly as the patch matrix.
    const bool direct = (k == 1 && stride == 1 && padding == 0);
    std::vector<T> cols;
    if (!direct) {
        cols.resize(static_cast<std::size_t>(patch) * plane);
        im2col(x.values().data(), c_in, height, width, k, stride, padding, out_h, out_w, cols.data());
    }
    const T* patches = direct ? x.values().data() : cols.data();

    std::vector<T> out(static_cast<std::size_t>(c_out) * plane);
    ConstMatMap<T> w_mat(kernel.values().data(), c_out, patch);
    ConstMatMap<T> p_mat(patches, patch, plane);
    MatMap<T> y_mat(out.data(), c_out, plane);
    y_mat.noalias() = w_mat * p_mat;
    if (bias.defined()) {
        for (int o = 0; o < c_out; ++o) {
            y_mat.row(o).array() += bias[o];
        }
    }

    std::vector<Tensor<T>> inputs{x, kernel};
    if (bias.defined()) {
        inputs.push_back(bias);
    }
    const bool keep_cols = GradMode::enabled() && kernel.requires_grad() && !direct;
    auto backward = [=, cols = keep_cols ? std::move(cols) : std::vector<T>{}](detail::Node<T>& self) {
        ConstMatMap<T> dy(self.grad.data(), c_out, plane);
        if (tracks(self, 1)) {
            const T* pdata = direct ? self.inputs[0]->value.data() : cols.data();
            ConstMatMap<T> p(pdata, patch, plane);
            MatMap<T> dw(self.inputs[1]->grad_buffer().data(), c_out, patch);
            dw.noalias() += dy * p.transpose();
        }
        if (self.inputs.size() > 2 && tracks(self, 2)) {
            auto& db = self.inputs[2]->grad_buffer();
            // Plain loop: Eigen's vectorized sum peels by address alignment,
            // which would make the result depend on where the buffer lives.
            for (int o = 0; o < c_out; ++o) {
                const T* row = self.grad.data() + static_cast<std::size_t>(o) * plane;
                T acc = 0;
                for (int i = 0; i < plane; ++i) {
                    acc += row[i];
                }
                db[o] += acc;
            }
        }
        if (tracks(self, 0)) {
            ConstMatMap<T> w(self.inputs[1]->value.data(), c_out, patch);
            auto& dx = self.inputs[0]->grad_buffer();
            if (direct) {
                MatMap<T> dx_mat(dx.data(), patch, plane);
                dx_mat.noalias() += w.transpose() * dy;
            } else {
                RowMat<T> dcols = w.transpose() * dy;
                col2im(dcols.data(), c_in, height, width, k, stride, padding, out_h, out_w, dx.data());
            }
        }
    };
    return Tensor<T>::from_op({c_out, out_h, out_w}, std::move(out), inputs, std::move(backward), "conv2d");
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts)
{
    require(!parts.empty(), ErrorKind::config, "concat_channels: no inputs");
    const int height = parts[0].dim(1), width = parts[0].dim(2);
    int channels = 0;
    for (const auto& p : parts) {
        require_rank(p, 3, "concat_channels");
        require(p.dim(1) == height && p.dim(2) == width, ErrorKind::config,
                "concat_channels: spatial mismatch " + shape_str(p.shape()));
        channels += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(static_cast<std::size_t>(channels) * height * width);
    for (const auto& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return Tensor<T>::from_op({channels, height, width}, std::move(out), parts, [](detail::Node<T>& self) {
        std::size_t offset = 0;
        for (auto& in : self.inputs) {
            const std::size_t n = in->value.size();
            if (in->requires_grad) {
                auto& g = in->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] += self.grad[offset + i];
                }
            }
            offset += n;
        }
    }, "concat_channels");
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x)
{
    require_rank(x, 3, "upsample_nearest2x");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<T> out(static_cast<std::size_t>(c) * 4 * h * w);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < 2 * h; ++y) {
            for (int xx = 0; xx < 2 * w; ++xx) {
                out[(static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w + xx] =
                    x[(static_cast<std::size_t>(ch) * h + y / 2) * w + xx / 2];
            }
        }
    }
    return Tensor<T>::from_op({c, 2 * h, 2 * w}, std::move(out), {x}, [c, h, w](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (int ch = 0; ch < c; ++ch) {
            for (int y = 0; y < 2 * h; ++y) {
                for (int xx = 0; xx < 2 * w; ++xx) {
                    g[(static_cast<std::size_t>(ch) * h + y / 2) * w + xx / 2] +=
                        self.grad[(static_cast<std::size_t>(ch) * 2 * h + y) * 2 * w + xx];
                }
            }
        }
    }, "upsample_nearest2x");
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape)
{
    require(shape_numel(shape) == x.numel(), ErrorKind::config,
            "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
    std::vector<T> out(x.values().begin(), x.values().end());
    return Tensor<T>::from_op(std::move(shape), std::move(out), {x}, [](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    }, "reshape");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& m)
{
    require_rank(m, 2, "transpose");
    const int rows = m.dim(0), cols = m.dim(1);
    std::vector<T> out(m.numel());
    MatMap<T>(out.data(), cols, rows) = ConstMatMap<T>(m.values().data(), rows, cols).transpose();
    return Tensor<T>::from_op({cols, rows}, std::move(out), {m}, [rows, cols](detail::Node<T>& self) {
        MatMap<T> g(self.inputs[0]->grad_buffer().data(), rows, cols);
        g += ConstMatMap<T>(self.grad.data(), cols, rows).transpose();
    }, "transpose");
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b)
{
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    require(b.dim(0) == k, ErrorKind::config,
            "matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<T> out(static_cast<std::size_t>(n) * m);
    MatMap<T>(out.data(), n, m).noalias() =
        ConstMatMap<T>(a.values().data(), n, k) * ConstMatMap<T>(b.values().data(), k, m);
    return Tensor<T>::from_op({n, m}, std::move(out), {a, b}, [n, k, m](detail::Node<T>& self) {
        ConstMatMap<T> dy(self.grad.data(), n, m);
        if (tracks(self, 0)) {
            MatMap<T> da(self.inputs[0]->grad_buffer().data(), n, k);
            da.noalias() += dy * ConstMatMap<T>(self.inputs[1]->value.data(), k, m).transpose();
        }
        if (tracks(self, 1)) {
            MatMap<T> db(self.inputs[1]->grad_buffer().data(), k, m);
            db.noalias() += ConstMatMap<T>(self.inputs[0]->value.data(), n, k).transpose() * dy;
        }
    }, "matmul");
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& m)
{
    require_rank(m, 2, "softmax_rows");
    const int rows = m.dim(0), cols = m.dim(1);
    for (T v : m.values()) {
        require(std::isfinite(v), ErrorKind::numeric, "softmax_rows: non-finite input");
    }
    std::vector<T> out(m.numel());
    for (int r = 0; r < rows; ++r) {
        const T* in = m.values().data() + static_cast<std::size_t>(r) * cols;
        T* o = out.data() + static_cast<std::size_t>(r) * cols;
        const T row_max = *std::max_element(in, in + cols);
        T total = 0;
        for (int c = 0; c < cols; ++c) {
            o[c] = std::exp(in[c] - row_max);
            total += o[c];
        }
        for (int c = 0; c < cols; ++c) {
            o[c] /= total;
        }
    }
    return Tensor<T>::from_op(m.shape(), std::move(out), {m}, [rows, cols](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (int r = 0; r < rows; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * cols;
            T dot = 0;
            for (int c = 0; c < cols; ++c) {
                dot += self.grad[base + c] * self.value[base + c];
            }
            for (int c = 0; c < cols; ++c) {
                g[base + c] += self.value[base + c] * (self.grad[base + c] - dot);
            }
        }
    }, "softmax_rows");
}

#define OBDA_INSTANTIATE_OPS(T)                                                                     \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
    template Tensor<T> scale(const Tensor<T>&, T);                                                   \
    template Tensor<T> silu(const Tensor<T>&);                                                       \
    template Tensor<T> sum(const Tensor<T>&);                                                        \
    template Tensor<T> mean(const Tensor<T>&);                                                       \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);       \
    template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                               \
    template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                         \
    template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
    template Tensor<T> transpose(const Tensor<T>&);                                                  \
    template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
    template Tensor<T> softmax_rows(const Tensor<T>&);

OBDA_INSTANTIATE_OPS(float)
OBDA_INSTANTIATE_OPS(double)

}  // namespace obda
