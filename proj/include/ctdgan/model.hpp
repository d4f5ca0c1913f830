#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ctdgan/autodiff.hpp"
#include "ctdgan/optim.hpp"
#include "ctdgan/transformer.hpp"

namespace ctdgan {

enum class Mode { Train, Eval };

/// Latent width |z| = noise_dim + sum of discrete widths + k + |Y|.
std::size_t latent_width(const Layout& layout, std::size_t noise_dim);

struct GeneratorOutput {
    /// B x layout.width in layout order. Continuous entries are tanh outputs,
    /// every other segment is a gumbel-softmax row.
    ad::Var rows;
    /// Per layout segment: the segment's slice of `rows`.
    std::vector<ad::Var> probs;
    /// Per layout segment: log of the gumbel-softmax output; undefined for
    /// the continuous segment.
    std::vector<ad::Var> log_probs;
};

/// Two residual blocks (affine, batch norm, relu; the block input is
/// concatenated in front of its activation) followed by one head per layout
/// segment reading the full residual stack.
class GeneratorNet {
public:
    GeneratorNet() = default;
    GeneratorNet(const Layout& layout, std::size_t noise_dim, std::size_t hidden_width, std::uint64_t seed);

    /// Train mode uses batch statistics and updates the running ones.
    /// Throws WidthMismatch when z does not have latent_width() columns.
    GeneratorOutput forward(const Matrix& z, double tau, Mode mode, ad::Rng& rng);

    std::size_t latent_width() const noexcept { return latent_width_; }
    std::size_t noise_dim() const noexcept { return noise_dim_; }
    std::size_t hidden_width() const noexcept { return hidden_; }
    const Layout& layout() const noexcept { return layout_; }
    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }

    static constexpr double kBatchNormMomentum = 0.1;
    static constexpr double kBatchNormEps = 1e-5;

private:
    ad::Var block(const ad::Var& x, int index, Mode mode);

    Layout layout_;
    std::size_t noise_dim_ = 0;
    std::size_t latent_width_ = 0;
    std::size_t hidden_ = 0;
    ParamStore params_;
};

/// Packs `pac` consecutive rows into one input, then two affine +
/// leaky_relu(0.2) + dropout layers and a scalar output. No batch norm.
class CriticNet {
public:
    CriticNet() = default;
    CriticNet(std::size_t row_width, std::size_t pac, std::size_t hidden_width, std::uint64_t seed,
              double dropout = 0.5);

    /// x: B x row_width -> (B / pac) x 1. Throws BatchNotPackable.
    ad::Var forward(const ad::Var& x, Mode mode, ad::Rng& rng) const;
    /// x: packs x (pac * row_width), already packed.
    ad::Var forward_packed(const ad::Var& x, Mode mode, ad::Rng& rng) const;

    /// B x w -> (B / pac) x (pac * w), consecutive rows side by side.
    ad::Var pack(const ad::Var& x) const;

    std::size_t pac() const noexcept { return pac_; }
    std::size_t row_width() const noexcept { return row_width_; }
    double dropout() const noexcept { return dropout_; }
    ParamStore& params() noexcept { return params_; }
    const ParamStore& params() const noexcept { return params_; }

    static constexpr double kLeakySlope = 0.2;

private:
    std::size_t row_width_ = 0;
    std::size_t pac_ = 1;
    std::size_t hidden_ = 0;
    double dropout_ = 0.5;
    ParamStore params_;
};

/// Adds "<prefix>.weight" (out x in, uniform in +-1/sqrt(in)) and
/// "<prefix>.bias" (1 x out, zero).
void init_affine(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, ad::Rng& rng);

}  // namespace ctdgan
