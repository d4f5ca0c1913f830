#include "ctdgan/model.hpp"

#include <cmath>
#include <string>

#include "ctdgan/error.hpp"

namespace ctdgan {

std::size_t latent_width(const Layout& layout, std::size_t noise_dim) {
    return noise_dim + layout.width - layout.continuous().width;
}

void init_affine(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, ad::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    store.add(prefix + ".weight", std::move(w));
    store.add(prefix + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
}

namespace {

std::string head_name(std::size_t segment) {
    std::string digits = std::to_string(segment);
    if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
    return "head" + digits;
}

}  // namespace

GeneratorNet::GeneratorNet(const Layout& layout, std::size_t noise_dim, std::size_t hidden_width, std::uint64_t seed)
    : layout_(layout), noise_dim_(noise_dim), latent_width_(ctdgan::latent_width(layout, noise_dim)),
      hidden_(hidden_width) {
    if (hidden_width == 0) throw Error(ErrorCode::InvalidConfig, "hidden width must be >= 1");
    ad::Rng rng(seed);
    const auto h = static_cast<Eigen::Index>(hidden_);
    const std::size_t widths[] = {latent_width_, latent_width_ + hidden_};
    for (int b = 0; b < 2; ++b) {
        const std::string prefix = "block" + std::to_string(b + 1);
        init_affine(params_, prefix, widths[b], hidden_, rng);
        params_.add(prefix + ".bn.scale", Matrix::Ones(1, h));
        params_.add(prefix + ".bn.shift", Matrix::Zero(1, h));
        params_.add(prefix + ".bn.running_mean", Matrix::Zero(1, h), /*trainable=*/false);
        params_.add(prefix + ".bn.running_var", Matrix::Ones(1, h), /*trainable=*/false);
    }
    const std::size_t stack_width = latent_width_ + 2 * hidden_;
    for (std::size_t s = 0; s < layout_.segments.size(); ++s) {
        if (layout_.segments[s].width == 0) continue;
        init_affine(params_, head_name(s), stack_width, layout_.segments[s].width, rng);
    }
}

ad::Var GeneratorNet::block(const ad::Var& x, int index, Mode mode) {
    const std::string prefix = "block" + std::to_string(index);
    const ad::Var pre = ad::affine(x, params_.get(prefix + ".weight"), params_.get(prefix + ".bias"));
    const ad::Var& scale = params_.get(prefix + ".bn.scale");
    const ad::Var& shift = params_.get(prefix + ".bn.shift");
    ad::Var normalized;
    if (mode == Mode::Train) {
        RowVector mean, var;
        normalized = ad::batch_norm_train(pre, scale, shift, kBatchNormEps, &mean, &var);
        const double n = static_cast<double>(pre.rows());
        const RowVector unbiased = n > 1 ? RowVector(var * (n / (n - 1.0))) : var;
        Matrix running_mean = params_.get(prefix + ".bn.running_mean").value();
        Matrix running_var = params_.get(prefix + ".bn.running_var").value();
        running_mean = (1.0 - kBatchNormMomentum) * running_mean + kBatchNormMomentum * Matrix(mean);
        running_var = (1.0 - kBatchNormMomentum) * running_var + kBatchNormMomentum * Matrix(unbiased);
        params_.set_value(prefix + ".bn.running_mean", running_mean);
        params_.set_value(prefix + ".bn.running_var", running_var);
    } else {
        const RowVector mean = params_.get(prefix + ".bn.running_mean").value().row(0);
        const RowVector var = params_.get(prefix + ".bn.running_var").value().row(0);
        normalized = ad::batch_norm_eval(pre, scale, shift, mean, var, kBatchNormEps);
    }
    const ad::Var parts[] = {x, ad::relu(normalized)};
    return ad::concat_cols(parts);
}

GeneratorOutput GeneratorNet::forward(const Matrix& z, double tau, Mode mode, ad::Rng& rng) {
    if (static_cast<std::size_t>(z.cols()) != latent_width_)
        throw Error(ErrorCode::WidthMismatch, "latent width " + std::to_string(z.cols()) + ", generator expects " +
                                                  std::to_string(latent_width_));
    const ad::Var a1 = block(ad::constant(z), 1, mode);
    const ad::Var a2 = block(a1, 2, mode);

    GeneratorOutput out;
    out.probs.resize(layout_.segments.size());
    out.log_probs.resize(layout_.segments.size());
    std::vector<ad::Var> pieces;
    for (std::size_t s = 0; s < layout_.segments.size(); ++s) {
        const auto& seg = layout_.segments[s];
        if (seg.width == 0) continue;
        const std::string name = head_name(s);
        const ad::Var logits = ad::affine(a2, params_.get(name + ".weight"), params_.get(name + ".bias"));
        if (seg.kind == Segment::Kind::Continuous) {
            out.probs[s] = ad::tanh(logits);
        } else {
            auto g = ad::gumbel_softmax(logits, tau, rng);
            out.probs[s] = g.probs;
            out.log_probs[s] = g.log_probs;
        }
        pieces.push_back(out.probs[s]);
    }
    out.rows = ad::concat_cols(pieces);
    return out;
}

CriticNet::CriticNet(std::size_t row_width, std::size_t pac, std::size_t hidden_width, std::uint64_t seed,
                     double dropout)
    : row_width_(row_width), pac_(pac), hidden_(hidden_width), dropout_(dropout) {
    if (pac == 0) throw Error(ErrorCode::InvalidConfig, "pac must be >= 1");
    if (hidden_width == 0) throw Error(ErrorCode::InvalidConfig, "hidden width must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must be in [0, 1)");
    ad::Rng rng(seed);
    init_affine(params_, "layer1", pac * row_width, hidden_, rng);
    init_affine(params_, "layer2", hidden_, hidden_, rng);
    init_affine(params_, "out", hidden_, 1, rng);
}

ad::Var CriticNet::pack(const ad::Var& x) const {
    const auto rows = static_cast<std::size_t>(x.rows());
    if (static_cast<std::size_t>(x.cols()) != row_width_)
        throw Error(ErrorCode::WidthMismatch, "critic row width " + std::to_string(x.cols()) + ", expected " +
                                                  std::to_string(row_width_));
    if (rows % pac_ != 0)
        throw Error(ErrorCode::BatchNotPackable,
                    "batch of " + std::to_string(rows) + " rows is not a multiple of pac " + std::to_string(pac_));
    return ad::reshape(x, static_cast<Eigen::Index>(rows / pac_), static_cast<Eigen::Index>(pac_ * row_width_));
}

ad::Var CriticNet::forward(const ad::Var& x, Mode mode, ad::Rng& rng) const {
    return forward_packed(pack(x), mode, rng);
}

ad::Var CriticNet::forward_packed(const ad::Var& x, Mode mode, ad::Rng& rng) const {
    const bool training = mode == Mode::Train;
    ad::Var h = ad::affine(x, params_.get("layer1.weight"), params_.get("layer1.bias"));
    h = ad::dropout(ad::leaky_relu(h, kLeakySlope), dropout_, training, rng);
    h = ad::affine(h, params_.get("layer2.weight"), params_.get("layer2.bias"));
    h = ad::dropout(ad::leaky_relu(h, kLeakySlope), dropout_, training, rng);
    return ad::affine(h, params_.get("out.weight"), params_.get("out.bias"));
}

}  // namespace ctdgan
