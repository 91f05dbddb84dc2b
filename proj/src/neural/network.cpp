#include "pricecast/neural/network.hpp"

#include "pricecast/io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace pricecast::neural {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'C', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

int first_lstm_inputs(const NetworkSpec& spec) {
    return spec.family == Family::B ? spec.filters : spec.inputs;
}

/// Fills a tensor row by row with Glorot-normal draws for the given fans.
/// Conv tensors count the receptive field in their fans, so the tensor
/// shape and the fan pair do not always coincide.
void fill_glorot(Eigen::Map<RowMat> t, int fan_in, int fan_out, Rng& rng) {
    const double stddev = std::sqrt(2.0 / double(fan_in + fan_out));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
            t(r, c) = rng.normal(0.0, stddev);
        }
    }
}

}

const char* family_name(Family family) {
    return family == Family::A ? "A" : "B";
}

Family family_from_name(std::string_view name) {
    if (name == "A") return Family::A;
    if (name == "B") return Family::B;
    throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.lstm_layers < 1 || spec.units < 1 || spec.window < 1 || spec.inputs < 1) {
        throw std::invalid_argument("NetworkSpec: sizes must be at least 1");
    }
    if (spec.dropout < 0.0 || spec.dropout >= 1.0) {
        throw std::invalid_argument("NetworkSpec: dropout must be in [0, 1)");
    }
    if (spec.alpha <= 0.0) {
        throw std::invalid_argument("NetworkSpec: learning rate must be positive");
    }
    if (spec.family == Family::A && spec.window != 4) {
        throw std::invalid_argument("NetworkSpec: family A uses a fixed window of 4");
    }
    if (spec.family == Family::B && (spec.filters < 1 || spec.kernel < 1)) {
        throw std::invalid_argument("NetworkSpec: family B needs conv filters and kernel");
    }
}

int pool_output_length(int input_len) {
    return input_len / 2;
}

int lstm_input_length(const NetworkSpec& spec) {
    if (spec.family == Family::A) {
        return spec.window;
    }
    const int after_conv1 = conv_output_length(spec.window, spec.kernel, spec.pad1);
    if (after_conv1 < 2) {
        return 0;     // average pooling needs at least two timesteps
    }
    const int after_pool = pool_output_length(after_conv1);
    const int after_conv2 =
        spec.pad2 == Padding::None ? after_pool - spec.kernel + 1 : after_pool;
    return after_conv2;
}

bool shape_feasible(const NetworkSpec& spec) {
    validate_spec(spec);
    if (spec.family == Family::B && spec.pad1 == Padding::None && spec.kernel > spec.window) {
        return false;
    }
    return lstm_input_length(spec) >= 1;
}

const TensorSlot& ParamLayout::find(const std::string& name) const {
    for (const auto& slot : slots) {
        if (slot.name == name) {
            return slot;
        }
    }
    throw std::invalid_argument("ParamLayout: no tensor named '" + name + "'");
}

ParamLayout make_layout(const NetworkSpec& spec) {
    validate_spec(spec);
    ParamLayout layout;
    auto add = [&layout](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        layout.slots.push_back({name, rows, cols, layout.total});
        layout.total += rows * cols;
    };
    if (spec.family == Family::B) {
        add("conv1.w", spec.filters, Eigen::Index(spec.kernel) * spec.inputs);
        add("conv1.b", spec.filters, 1);
        add("conv2.w", spec.filters, Eigen::Index(spec.kernel) * spec.filters);
        add("conv2.b", spec.filters, 1);
    }
    for (int layer = 0; layer < spec.lstm_layers; ++layer) {
        const int d_in = layer == 0 ? first_lstm_inputs(spec) : spec.units;
        const std::string prefix = "lstm" + std::to_string(layer);
        add(prefix + ".wx", 4 * Eigen::Index(spec.units), d_in);
        add(prefix + ".wh", 4 * Eigen::Index(spec.units), spec.units);
        add(prefix + ".b", 4 * Eigen::Index(spec.units), 1);
    }
    add("dense.w", 1, spec.units);
    add("dense.b", 1, 1);
    return layout;
}

NetworkParams::NetworkParams(const NetworkSpec& spec)
    : spec_(spec), layout_(make_layout(spec)), flat_(Eigen::VectorXd::Zero(layout_.total)) {}

Eigen::Map<RowMat> NetworkParams::tensor(const std::string& name) {
    const TensorSlot& slot = layout_.find(name);
    return {flat_.data() + slot.offset, slot.rows, slot.cols};
}

Eigen::Map<const RowMat> NetworkParams::tensor(const std::string& name) const {
    const TensorSlot& slot = layout_.find(name);
    return {flat_.data() + slot.offset, slot.rows, slot.cols};
}

Eigen::Map<Eigen::VectorXd> NetworkParams::vec(const std::string& name) {
    const TensorSlot& slot = layout_.find(name);
    if (slot.cols != 1) {
        throw std::invalid_argument("NetworkParams: '" + name + "' is not a vector");
    }
    return {flat_.data() + slot.offset, slot.rows};
}

Eigen::Map<const Eigen::VectorXd> NetworkParams::vec(const std::string& name) const {
    const TensorSlot& slot = layout_.find(name);
    if (slot.cols != 1) {
        throw std::invalid_argument("NetworkParams: '" + name + "' is not a vector");
    }
    return {flat_.data() + slot.offset, slot.rows};
}

NetworkParams NetworkParams::init(const NetworkSpec& spec, Rng& rng) {
    NetworkParams params(spec);
    // Weight draws happen in layout order so a seed pins every value.
    if (spec.family == Family::B) {
        const int field_in = spec.kernel * spec.inputs;
        const int field_mid = spec.kernel * spec.filters;
        fill_glorot(params.tensor("conv1.w"), field_in, field_mid, rng);
        fill_glorot(params.tensor("conv2.w"), field_mid, field_mid, rng);
    }
    for (int layer = 0; layer < spec.lstm_layers; ++layer) {
        const int d_in = layer == 0 ? first_lstm_inputs(spec) : spec.units;
        const std::string prefix = "lstm" + std::to_string(layer);
        fill_glorot(params.tensor(prefix + ".wx"), d_in, 4 * spec.units, rng);
        fill_glorot(params.tensor(prefix + ".wh"), spec.units, 4 * spec.units, rng);
        // Forget-gate bias block starts at 1 so early training does not
        // flush the cell state.
        params.vec(prefix + ".b").segment(spec.units, spec.units).setOnes();
    }
    fill_glorot(params.tensor("dense.w"), spec.units, 1, rng);
    return params;
}

DropoutPlan make_dropout_plan(const NetworkSpec& spec, Rng& rng) {
    DropoutPlan plan;
    const int steps = lstm_input_length(spec);
    if (steps < 1) {
        throw std::invalid_argument("make_dropout_plan: infeasible shape");
    }
    plan.masks.reserve(std::size_t(spec.lstm_layers));
    for (int layer = 0; layer < spec.lstm_layers; ++layer) {
        plan.masks.push_back(dropout_mask(steps, spec.units, spec.dropout, rng));
    }
    return plan;
}

double forward_one(const NetworkParams& params, const Eigen::MatrixXd& x,
                   const DropoutPlan* plan, ForwardCache* cache) {
    const NetworkSpec& spec = params.spec();
    if (x.rows() != spec.window || x.cols() != spec.inputs) {
        throw std::invalid_argument("forward_one: window shape mismatch");
    }
    if (plan != nullptr && int(plan->masks.size()) != spec.lstm_layers) {
        throw std::invalid_argument("forward_one: dropout plan layer count mismatch");
    }

    ForwardCache local;
    ForwardCache& fc = cache != nullptr ? *cache : local;
    fc.lstm.assign(std::size_t(spec.lstm_layers), LstmCache{});
    fc.lstm_dropped.assign(std::size_t(spec.lstm_layers), Eigen::MatrixXd{});

    Eigen::MatrixXd seq = x;
    if (spec.family == Family::B) {
        fc.conv1_out = conv1d_forward(params.tensor("conv1.w"), params.vec("conv1.b"), seq,
                                      spec.kernel, spec.pad1, &fc.conv1);
        fc.pool_out = avgpool1d_forward(fc.conv1_out);
        seq = conv1d_forward(params.tensor("conv2.w"), params.vec("conv2.b"), fc.pool_out,
                             spec.kernel, spec.pad2, &fc.conv2);
    }
    for (int layer = 0; layer < spec.lstm_layers; ++layer) {
        const std::string prefix = "lstm" + std::to_string(layer);
        Eigen::MatrixXd hidden =
            lstm_forward(params.tensor(prefix + ".wx"), params.tensor(prefix + ".wh"),
                         params.vec(prefix + ".b"), seq, &fc.lstm[std::size_t(layer)]);
        if (plan != nullptr && spec.dropout > 0.0) {
            hidden = hidden.cwiseProduct(plan->masks[std::size_t(layer)]);
        }
        fc.lstm_dropped[std::size_t(layer)] = hidden;
        seq = std::move(hidden);
    }
    const Eigen::VectorXd last_state = seq.row(seq.rows() - 1).transpose();
    const Eigen::VectorXd out =
        dense_forward(params.tensor("dense.w"), params.vec("dense.b"), last_state);
    fc.prediction = out(0);
    return fc.prediction;
}

void backward_one(const NetworkParams& params, const ForwardCache& cache,
                  const DropoutPlan* plan, double d_pred, NetworkParams& grads) {
    const NetworkSpec& spec = params.spec();
    const Eigen::MatrixXd& top_seq = cache.lstm_dropped.back();
    const Eigen::Index last = top_seq.rows() - 1;

    Eigen::VectorXd dy(1);
    dy(0) = d_pred;
    const Eigen::VectorXd last_state = top_seq.row(last).transpose();
    Eigen::VectorXd d_state = dense_backward(params.tensor("dense.w"), last_state, dy,
                                             grads.tensor("dense.w"), grads.vec("dense.b"));

    // Only the last timestep of the top hidden sequence feeds the dense
    // layer; all other rows start with zero gradient.
    Eigen::MatrixXd d_hidden = Eigen::MatrixXd::Zero(top_seq.rows(), top_seq.cols());
    d_hidden.row(last) = d_state.transpose();

    Eigen::MatrixXd d_seq;
    for (int layer = spec.lstm_layers - 1; layer >= 0; --layer) {
        if (plan != nullptr && spec.dropout > 0.0) {
            d_hidden = d_hidden.cwiseProduct(plan->masks[std::size_t(layer)]);
        }
        const std::string prefix = "lstm" + std::to_string(layer);
        d_seq = lstm_backward(params.tensor(prefix + ".wx"), params.tensor(prefix + ".wh"),
                              cache.lstm[std::size_t(layer)], d_hidden,
                              grads.tensor(prefix + ".wx"), grads.tensor(prefix + ".wh"),
                              grads.vec(prefix + ".b"));
        d_hidden = std::move(d_seq);     // feeds the dropout of the layer below
    }

    if (spec.family == Family::B) {
        const Eigen::MatrixXd d_pool =
            conv1d_backward(params.tensor("conv2.w"), cache.conv2, d_hidden, spec.kernel,
                            grads.tensor("conv2.w"), grads.vec("conv2.b"));
        const Eigen::MatrixXd d_conv1 =
            avgpool1d_backward(int(cache.conv1_out.rows()), d_pool);
        conv1d_backward(params.tensor("conv1.w"), cache.conv1, d_conv1, spec.kernel,
                        grads.tensor("conv1.w"), grads.vec("conv1.b"));
    }
}

Eigen::VectorXd forward(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                        bool training, Rng* rng) {
    if (training && rng == nullptr) {
        throw std::invalid_argument("forward: training mode needs an rng");
    }
    Eigen::VectorXd out(Eigen::Index(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (training && params.spec().dropout > 0.0) {
            const DropoutPlan plan = make_dropout_plan(params.spec(), *rng);
            out(Eigen::Index(i)) = forward_one(params, batch[i], &plan);
        } else {
            out(Eigen::Index(i)) = forward_one(params, batch[i], nullptr);
        }
    }
    return out;
}

double loss_and_grads(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                      const Eigen::VectorXd& targets, const std::vector<DropoutPlan>* plans,
                      NetworkParams& grads) {
    const std::size_t count = batch.size();
    if (count == 0 || targets.size() != Eigen::Index(count)) {
        throw std::invalid_argument("loss_and_grads: batch and targets misaligned");
    }
    if (plans != nullptr && plans->size() != count) {
        throw std::invalid_argument("loss_and_grads: one dropout plan per sample required");
    }
    double mse = 0.0;
    ForwardCache cache;
    for (std::size_t i = 0; i < count; ++i) {
        const DropoutPlan* plan = plans != nullptr ? &(*plans)[i] : nullptr;
        const double pred = forward_one(params, batch[i], plan, &cache);
        const double err = pred - targets(Eigen::Index(i));
        mse += err * err;
        backward_one(params, cache, plan, 2.0 * err / double(count), grads);
    }
    mse /= double(count);
    if (!std::isfinite(mse)) {
        throw std::runtime_error("loss_and_grads: loss is not finite");
    }
    return mse;
}

double evaluate_mse(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                    const Eigen::VectorXd& targets) {
    if (batch.empty() || targets.size() != Eigen::Index(batch.size())) {
        throw std::invalid_argument("evaluate_mse: batch and targets misaligned");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double err = forward_one(params, batch[i], nullptr) - targets(Eigen::Index(i));
        mse += err * err;
    }
    return mse / double(batch.size());
}

void save_network(const std::filesystem::path& path, const NetworkParams& params,
                  int stopped_epoch) {
    if (std::endian::native != std::endian::little) {
        throw std::runtime_error("save_network: only little-endian hosts are supported");
    }
    const NetworkSpec& spec = params.spec();
    json header;
    header["family"] = family_name(spec.family);
    header["lstm_layers"] = spec.lstm_layers;
    header["units"] = spec.units;
    header["dropout"] = spec.dropout;
    header["alpha"] = spec.alpha;
    header["filters"] = spec.filters;
    header["kernel"] = spec.kernel;
    header["pad1"] = padding_name(spec.pad1);
    header["pad2"] = padding_name(spec.pad2);
    header["window"] = spec.window;
    header["inputs"] = spec.inputs;
    header["stopped_epoch"] = stopped_epoch;
    header["count"] = params.count();
    header["tensors"] = json::array();
    for (const auto& slot : params.layout().slots) {
        header["tensors"].push_back(
            {{"name", slot.name}, {"rows", slot.rows}, {"cols", slot.cols},
             {"offset", slot.offset}});
    }
    const std::string header_text = header.dump();

    std::string blob;
    blob.reserve(16 + header_text.size() + params.count() * sizeof(double));
    blob.append(kMagic, sizeof(kMagic));
    const std::uint32_t version = kFormatVersion;
    blob.append(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header_text.size();
    blob.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    blob.append(header_text);
    blob.append(reinterpret_cast<const char*>(params.flat().data()),
                params.count() * sizeof(double));
    io::write_atomic(path, blob);
}

LoadedNetwork load_network(const std::filesystem::path& path) {
    if (std::endian::native != std::endian::little) {
        throw std::runtime_error("load_network: only little-endian hosts are supported");
    }
    const std::string blob = io::read_file(path);
    if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path.string() + ": not a network weight file");
    }
    std::uint32_t version = 0;
    std::memcpy(&version, blob.data() + 4, sizeof(version));
    if (version != kFormatVersion) {
        throw std::runtime_error(path.string() + ": unsupported weight format version " +
                                 std::to_string(version));
    }
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, blob.data() + 8, sizeof(header_len));
    if (blob.size() < 16 + header_len) {
        throw std::runtime_error(path.string() + ": truncated header");
    }
    const json header = json::parse(blob.substr(16, header_len));

    NetworkSpec spec;
    spec.family = family_from_name(header.at("family").get<std::string>());
    spec.lstm_layers = header.at("lstm_layers").get<int>();
    spec.units = header.at("units").get<int>();
    spec.dropout = header.at("dropout").get<double>();
    spec.alpha = header.at("alpha").get<double>();
    spec.filters = header.at("filters").get<int>();
    spec.kernel = header.at("kernel").get<int>();
    spec.pad1 = padding_from_name(header.at("pad1").get<std::string>());
    spec.pad2 = padding_from_name(header.at("pad2").get<std::string>());
    spec.window = header.at("window").get<int>();
    spec.inputs = header.at("inputs").get<int>();

    LoadedNetwork loaded;
    loaded.params = NetworkParams(spec);
    loaded.stopped_epoch = header.at("stopped_epoch").get<int>();
    const std::uint64_t count = header.at("count").get<std::uint64_t>();
    if (count != loaded.params.count()) {
        throw std::runtime_error(path.string() + ": weight count does not match architecture");
    }
    const std::size_t expected = 16 + header_len + count * sizeof(double);
    if (blob.size() != expected) {
        throw std::runtime_error(path.string() + ": truncated weight data");
    }
    std::memcpy(loaded.params.flat().data(), blob.data() + 16 + header_len,
                count * sizeof(double));
    return loaded;
}

}
