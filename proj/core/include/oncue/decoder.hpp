#ifndef ONCUE_DECODER_HPP
#define ONCUE_DECODER_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "oncue/layout.hpp"
#include "oncue/mask.hpp"
#include "oncue/matrix.hpp"
#include "oncue/schedule.hpp"

namespace oncue {

struct DecoderConfig {
    AggregationSchedule schedule;
    MaskRules rules;
    int vocab_size = 32;
    std::uint64_t seed = 1;
};

// Column values an already-processed clip leaves behind for later rows: the
// per-layer hidden values of its first-frame span and aggregation levels
// (level entries have zero rows before their insertion layer), plus the
// final-layer summary tokens that form the carried cognition state. All
// snapshots are post-splice, i.e. exactly what attention at that layer sees.
struct CarriedClip {
    std::size_t n_v = 0;  // raw visual token count, for layout reconstruction
    Matrix summary;       // final-layer highest-level tokens, n_vc x d
    std::vector<Matrix> first_frame;         // layers 0..L inclusive
    std::array<std::vector<Matrix>, 3> agg;  // per level, layers 0..L inclusive

    friend bool operator==(const CarriedClip&, const CarriedClip&) = default;
};

struct DecoderState {
    std::vector<CarriedClip> clips;  // stream order

    friend bool operator==(const DecoderState&, const DecoderState&) = default;
};

// Optional per-layer record for tests and inspection.
struct DecoderTrace {
    SequenceLayout layout;
    std::vector<Matrix> hidden_in;     // h_l as attention at layer l sees it
    std::vector<Matrix> attn_probs;    // per layer; 0 wherever the mask blocks
    std::vector<Matrix> attn_out;      // per layer; pre-residual, computed rows
    std::vector<AttentionMask> masks;  // mask applied at each layer
};

struct DecoderResult {
    Matrix text_logits;  // text_pre rows then text_post rows, x vocab
    DecoderState state;
};

// Single-head pre-norm causal decoder with the aggregation-token splice
// schedule: level j's tokens join at layer {0, L/3, 2L/3}[j-1], initialized by
// pooling the source level's hidden values at that layer. Weights are seeded
// Gaussians; every numeric loop is spelled out so identical inputs give
// bit-identical outputs, which the incremental/full equivalence relies on.
class ToyDecoder {
  public:
    explicit ToyDecoder(const DecoderConfig& cfg);

    const DecoderConfig& config() const { return cfg_; }

    // Dense forward over the whole prefix: every row of every clip computed.
    DecoderResult forward_full(const std::vector<Matrix>& clips,
                               const Matrix& text_pre, const Matrix& text_post,
                               DecoderTrace* trace = nullptr) const;

    // One new clip against the carried state: only text and new-clip rows are
    // computed; earlier clips contribute their cached column values. Folding
    // forward_step over a prefix yields bit-identical logits, summaries, and
    // state to one forward_full call on that prefix.
    DecoderResult forward_step(const DecoderState& carried,
                               const Matrix& new_clip, const Matrix& text_pre,
                               const Matrix& text_post,
                               DecoderTrace* trace = nullptr) const;

    // Recomputes row `row`'s attention output (pre-residual) at `layer` from
    // an arbitrary hidden matrix. Bit-identical to the traced attn_out row for
    // the traced hidden_in; perturbing any mask-invisible column must leave it
    // unchanged.
    std::vector<double> attention_row(int layer, const Matrix& hidden_in,
                                      const AttentionMask& mask,
                                      std::size_t row) const;

    SequenceLayout layout_for(const std::vector<std::size_t>& clip_tokens,
                              std::size_t text_pre_len,
                              std::size_t text_post_len) const;
    // Band mask for a layer: level count 1 + floor(3*layer/L), capped by the
    // rules' max_levels.
    AttentionMask mask_for_layer(const SequenceLayout& layout, int layer) const;

  private:
    struct LayerWeights {
        std::vector<double> ln1_g, ln1_b, ln2_g, ln2_b;
        Matrix wq, wk, wv, wo;  // d x d
        Matrix w1, w2;          // d x hidden, hidden x d
        std::vector<double> b1, b2;
    };

    DecoderResult run(const DecoderState* carried,
                      const std::vector<Matrix>& new_clips,
                      const Matrix& text_pre, const Matrix& text_post,
                      DecoderTrace* trace) const;

    DecoderConfig cfg_;
    std::size_t hidden_;
    std::vector<LayerWeights> layers_;
    std::vector<double> lnf_g, lnf_b;
    Matrix unembed_;  // d x vocab
};

}  // namespace oncue

#endif  // ONCUE_DECODER_HPP
