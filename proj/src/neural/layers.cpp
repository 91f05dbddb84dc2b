#include "pricecast/neural/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pricecast::neural {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}

const char* padding_name(Padding pad) {
    switch (pad) {
        case Padding::None: return "none";
        case Padding::Same: return "same";
        case Padding::Causal: return "causal";
    }
    throw std::invalid_argument("padding_name: bad enum value");
}

Padding padding_from_name(std::string_view name) {
    if (name == "none") return Padding::None;
    if (name == "same") return Padding::Same;
    if (name == "causal") return Padding::Causal;
    throw std::invalid_argument("unknown padding '" + std::string(name) + "'");
}

RowMat glorot_normal(int fan_in, int fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) {
        throw std::invalid_argument("glorot_normal: fans must be at least 1");
    }
    const double stddev = std::sqrt(2.0 / double(fan_in + fan_out));
    RowMat w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = rng.normal(0.0, stddev);
        }
    }
    return w;
}

Eigen::VectorXd dense_forward(Eigen::Ref<const RowMat> w, Eigen::Ref<const Eigen::VectorXd> b,
                              const Eigen::VectorXd& x) {
    if (w.cols() != x.size() || w.rows() != b.size()) {
        throw std::invalid_argument("dense_forward: shape mismatch");
    }
    return w * x + b;
}

Eigen::VectorXd dense_backward(Eigen::Ref<const RowMat> w, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dy, Eigen::Ref<RowMat> gw,
                               Eigen::Ref<Eigen::VectorXd> gb) {
    gw += dy * x.transpose();
    gb += dy;
    return w.transpose() * dy;
}

Eigen::MatrixXd lstm_forward(Eigen::Ref<const RowMat> wx, Eigen::Ref<const RowMat> wh,
                             Eigen::Ref<const Eigen::VectorXd> b, const Eigen::MatrixXd& seq,
                             LstmCache* cache) {
    const Eigen::Index steps = seq.rows();
    const Eigen::Index d = seq.cols();
    const Eigen::Index units = wh.cols();
    if (wx.rows() != 4 * units || wx.cols() != d || wh.rows() != 4 * units ||
        b.size() != 4 * units || steps < 1) {
        throw std::invalid_argument("lstm_forward: shape mismatch");
    }

    Eigen::MatrixXd hidden(steps, units);
    Eigen::MatrixXd gi(steps, units), gf(steps, units), gg(steps, units), go(steps, units);
    Eigen::MatrixXd cell(steps, units), cell_tanh(steps, units);
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(units);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(units);

    for (Eigen::Index t = 0; t < steps; ++t) {
        const Eigen::VectorXd z = wx * seq.row(t).transpose() + wh * h_prev + b;
        for (Eigen::Index u = 0; u < units; ++u) {
            const double i_g = sigmoid(z(u));
            const double f_g = sigmoid(z(units + u));
            const double g_g = std::tanh(z(2 * units + u));
            const double o_g = sigmoid(z(3 * units + u));
            const double c = f_g * c_prev(u) + i_g * g_g;
            const double ct = std::tanh(c);
            gi(t, u) = i_g;
            gf(t, u) = f_g;
            gg(t, u) = g_g;
            go(t, u) = o_g;
            cell(t, u) = c;
            cell_tanh(t, u) = ct;
            hidden(t, u) = o_g * ct;
        }
        h_prev = hidden.row(t);
        c_prev = cell.row(t);
    }

    if (cache != nullptr) {
        cache->input = seq;
        cache->gate_i = std::move(gi);
        cache->gate_f = std::move(gf);
        cache->gate_g = std::move(gg);
        cache->gate_o = std::move(go);
        cache->cell = std::move(cell);
        cache->cell_tanh = std::move(cell_tanh);
        cache->hidden = hidden;
    }
    return hidden;
}

Eigen::MatrixXd lstm_backward(Eigen::Ref<const RowMat> wx, Eigen::Ref<const RowMat> wh,
                              const LstmCache& cache, const Eigen::MatrixXd& d_hidden,
                              Eigen::Ref<RowMat> gwx, Eigen::Ref<RowMat> gwh,
                              Eigen::Ref<Eigen::VectorXd> gb) {
    const Eigen::Index steps = cache.input.rows();
    const Eigen::Index units = cache.hidden.cols();
    if (d_hidden.rows() != steps || d_hidden.cols() != units) {
        throw std::invalid_argument("lstm_backward: gradient shape mismatch");
    }

    Eigen::MatrixXd d_seq = Eigen::MatrixXd::Zero(steps, cache.input.cols());
    Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(units);
    Eigen::VectorXd dc_carry = Eigen::VectorXd::Zero(units);
    Eigen::VectorXd dz(4 * units);

    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        for (Eigen::Index u = 0; u < units; ++u) {
            const double dh = d_hidden(t, u) + dh_carry(u);
            const double o_g = cache.gate_o(t, u);
            const double ct = cache.cell_tanh(t, u);
            const double dc = dh * o_g * (1.0 - ct * ct) + dc_carry(u);
            const double i_g = cache.gate_i(t, u);
            const double f_g = cache.gate_f(t, u);
            const double g_g = cache.gate_g(t, u);
            const double c_prev = t > 0 ? cache.cell(t - 1, u) : 0.0;
            dz(u) = dc * g_g * i_g * (1.0 - i_g);
            dz(units + u) = dc * c_prev * f_g * (1.0 - f_g);
            dz(2 * units + u) = dc * i_g * (1.0 - g_g * g_g);
            dz(3 * units + u) = dh * ct * o_g * (1.0 - o_g);
            dc_carry(u) = dc * f_g;
        }
        gwx += dz * cache.input.row(t);
        if (t > 0) {
            gwh += dz * cache.hidden.row(t - 1);
        }
        gb += dz;
        d_seq.row(t) = (wx.transpose() * dz).transpose();
        dh_carry = wh.transpose() * dz;
    }
    return d_seq;
}

int conv_output_length(int input_len, int kernel, Padding pad) {
    if (kernel < 1 || input_len < 1) {
        throw std::invalid_argument("conv_output_length: bad sizes");
    }
    return pad == Padding::None ? input_len - kernel + 1 : input_len;
}

Eigen::MatrixXd conv1d_forward(Eigen::Ref<const RowMat> w, Eigen::Ref<const Eigen::VectorXd> b,
                               const Eigen::MatrixXd& seq, int kernel, Padding pad,
                               ConvCache* cache) {
    const Eigen::Index steps = seq.rows();
    const Eigen::Index channels = seq.cols();
    const Eigen::Index filters = w.rows();
    if (w.cols() != Eigen::Index(kernel) * channels || b.size() != filters) {
        throw std::invalid_argument("conv1d_forward: shape mismatch");
    }
    if (pad == Padding::None && Eigen::Index(kernel) > steps) {
        throw std::invalid_argument("conv1d_forward: kernel longer than input");
    }

    int pad_left = 0;
    int pad_right = 0;
    if (pad == Padding::Same) {
        pad_left = (kernel - 1) / 2;
        pad_right = kernel - 1 - pad_left;
    } else if (pad == Padding::Causal) {
        pad_left = kernel - 1;
    }
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(steps + pad_left + pad_right, channels);
    padded.middleRows(pad_left, steps) = seq;

    const Eigen::Index out_len = conv_output_length(int(steps), kernel, pad);
    Eigen::MatrixXd pre(out_len, filters);
    for (Eigen::Index t = 0; t < out_len; ++t) {
        for (Eigen::Index j = 0; j < filters; ++j) {
            double acc = b(j);
            for (int u = 0; u < kernel; ++u) {
                for (Eigen::Index c = 0; c < channels; ++c) {
                    acc += w(j, Eigen::Index(u) * channels + c) * padded(t + u, c);
                }
            }
            pre(t, j) = acc;
        }
    }
    if (cache != nullptr) {
        cache->padded = padded;
        cache->pre = pre;
        cache->pad_left = pad_left;
        cache->input_len = int(steps);
    }
    return pre.cwiseMax(0.0);
}

Eigen::MatrixXd conv1d_backward(Eigen::Ref<const RowMat> w, const ConvCache& cache,
                                const Eigen::MatrixXd& d_out, int kernel,
                                Eigen::Ref<RowMat> gw, Eigen::Ref<Eigen::VectorXd> gb) {
    const Eigen::Index out_len = cache.pre.rows();
    const Eigen::Index filters = cache.pre.cols();
    const Eigen::Index channels = cache.padded.cols();
    if (d_out.rows() != out_len || d_out.cols() != filters) {
        throw std::invalid_argument("conv1d_backward: gradient shape mismatch");
    }

    Eigen::MatrixXd d_padded = Eigen::MatrixXd::Zero(cache.padded.rows(), channels);
    for (Eigen::Index t = 0; t < out_len; ++t) {
        for (Eigen::Index j = 0; j < filters; ++j) {
            if (cache.pre(t, j) <= 0.0) {
                continue;     // ReLU gate
            }
            const double dpre = d_out(t, j);
            gb(j) += dpre;
            for (int u = 0; u < kernel; ++u) {
                for (Eigen::Index c = 0; c < channels; ++c) {
                    gw(j, Eigen::Index(u) * channels + c) += dpre * cache.padded(t + u, c);
                    d_padded(t + u, c) += dpre * w(j, Eigen::Index(u) * channels + c);
                }
            }
        }
    }
    return d_padded.middleRows(cache.pad_left, cache.input_len);
}

Eigen::MatrixXd avgpool1d_forward(const Eigen::MatrixXd& seq) {
    if (seq.rows() < 2) {
        throw std::invalid_argument("avgpool1d_forward: need at least two timesteps");
    }
    const Eigen::Index out_len = seq.rows() / 2;
    Eigen::MatrixXd out(out_len, seq.cols());
    for (Eigen::Index t = 0; t < out_len; ++t) {
        out.row(t) = 0.5 * (seq.row(2 * t) + seq.row(2 * t + 1));
    }
    return out;
}

Eigen::MatrixXd avgpool1d_backward(int input_len, const Eigen::MatrixXd& d_out) {
    Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(input_len, d_out.cols());
    for (Eigen::Index t = 0; t < d_out.rows(); ++t) {
        d_in.row(2 * t) = 0.5 * d_out.row(t);
        d_in.row(2 * t + 1) = 0.5 * d_out.row(t);
    }
    return d_in;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double r, Rng& rng) {
    if (r < 0.0 || r >= 1.0) {
        throw std::invalid_argument("dropout_mask: rate must be in [0, 1)");
    }
    const double keep_scale = 1.0 / (1.0 - r);
    Eigen::MatrixXd mask(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng.uniform() < r ? 0.0 : keep_scale;
        }
    }
    return mask;
}

Eigen::MatrixXd dropout_forward(const Eigen::MatrixXd& x, double r, bool training, Rng& rng) {
    if (!training || r == 0.0) {
        if (r < 0.0 || r >= 1.0) {
            throw std::invalid_argument("dropout_forward: rate must be in [0, 1)");
        }
        return x;
    }
    return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), r, rng));
}

}
