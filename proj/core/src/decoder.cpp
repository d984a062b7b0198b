#include "oncue/decoder.hpp"

#include <cmath>
#include <string>

#include "oncue/errors.hpp"
#include "oncue/pooling.hpp"
#include "oncue/rng.hpp"

namespace oncue {

namespace {

void layer_norm(const double* x, std::size_t d, const std::vector<double>& g,
                const std::vector<double>& b, double* out) {
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += x[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double c = x[i] - mean;
        var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * g[i] + b[i];
}

// y = x * W for a row vector x (1 x n) and W (n x m).
void row_times(const double* x, const Matrix& w, double* y) {
    for (std::size_t j = 0; j < w.cols; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < w.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* wrow = w.row(i);
        for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * wrow[j];
    }
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.gaussian(0.0, stddev);
    return m;
}

Matrix extract_rows(const Matrix& h, std::size_t begin, std::size_t len) {
    Matrix out(len, h.cols);
    for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < h.cols; ++c)
            out.at(r, c) = h.at(begin + r, c);
    return out;
}

void insert_rows(Matrix& h, std::size_t begin, const Matrix& rows) {
    for (std::size_t r = 0; r < rows.rows; ++r)
        for (std::size_t c = 0; c < rows.cols; ++c)
            h.at(begin + r, c) = rows.at(r, c);
}

}  // namespace

ToyDecoder::ToyDecoder(const DecoderConfig& cfg) : cfg_(cfg) {
    cfg_.schedule.validate();
    if (cfg_.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
    const std::size_t d = static_cast<std::size_t>(cfg_.schedule.d);
    hidden_ = 2 * d;
    const double w_std = 0.2 / std::sqrt(static_cast<double>(d));
    const double w2_std = 0.2 / std::sqrt(static_cast<double>(hidden_));

    Rng rng(cfg_.seed);
    layers_.resize(static_cast<std::size_t>(cfg_.schedule.layers));
    for (LayerWeights& lw : layers_) {
        lw.ln1_g.assign(d, 1.0);
        lw.ln1_b.assign(d, 0.0);
        lw.ln2_g.assign(d, 1.0);
        lw.ln2_b.assign(d, 0.0);
        lw.wq = gaussian_matrix(rng, d, d, w_std);
        lw.wk = gaussian_matrix(rng, d, d, w_std);
        lw.wv = gaussian_matrix(rng, d, d, w_std);
        lw.wo = gaussian_matrix(rng, d, d, w_std);
        lw.w1 = gaussian_matrix(rng, d, hidden_, w_std);
        lw.b1.assign(hidden_, 0.0);
        lw.w2 = gaussian_matrix(rng, hidden_, d, w2_std);
        lw.b2.assign(d, 0.0);
    }
    lnf_g.assign(d, 1.0);
    lnf_b.assign(d, 0.0);
    unembed_ = gaussian_matrix(rng, d, static_cast<std::size_t>(cfg_.vocab_size),
                               w_std);
}

SequenceLayout ToyDecoder::layout_for(const std::vector<std::size_t>& clip_tokens,
                                      std::size_t text_pre_len,
                                      std::size_t text_post_len) const {
    return build_layout(text_pre_len, clip_tokens, cfg_.schedule, text_post_len);
}

AttentionMask ToyDecoder::mask_for_layer(const SequenceLayout& layout,
                                         int layer) const {
    const int band = std::min(active_level_count(cfg_.schedule, layer),
                              cfg_.rules.max_levels);
    return build_band_mask(layout, band, cfg_.rules);
}

std::vector<double> ToyDecoder::attention_row(int layer, const Matrix& hidden_in,
                                              const AttentionMask& mask,
                                              std::size_t row) const {
    const std::size_t d = static_cast<std::size_t>(cfg_.schedule.d);
    const LayerWeights& lw = layers_[static_cast<std::size_t>(layer)];

    std::vector<double> xhat(d), q(d), k(d), v(d);
    layer_norm(hidden_in.row(row), d, lw.ln1_g, lw.ln1_b, xhat.data());
    row_times(xhat.data(), lw.wq, q.data());

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> scores;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c <= row && c < mask.n; ++c) {
        if (!mask.at(row, c)) continue;
        layer_norm(hidden_in.row(c), d, lw.ln1_g, lw.ln1_b, xhat.data());
        row_times(xhat.data(), lw.wk, k.data());
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += q[i] * k[i];
        scores.push_back(s * scale);
        cols.push_back(c);
    }

    std::vector<double> out(d, 0.0);
    if (cols.empty()) return out;

    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double denom = 0.0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        denom += s;
    }
    std::vector<double> mix(d, 0.0);
    for (std::size_t idx = 0; idx < cols.size(); ++idx) {
        const double alpha = scores[idx] / denom;
        layer_norm(hidden_in.row(cols[idx]), d, lw.ln1_g, lw.ln1_b, xhat.data());
        row_times(xhat.data(), lw.wv, v.data());
        for (std::size_t i = 0; i < d; ++i) mix[i] += alpha * v[i];
    }
    row_times(mix.data(), lw.wo, out.data());
    return out;
}

DecoderResult ToyDecoder::forward_full(const std::vector<Matrix>& clips,
                                       const Matrix& text_pre,
                                       const Matrix& text_post,
                                       DecoderTrace* trace) const {
    return run(nullptr, clips, text_pre, text_post, trace);
}

DecoderResult ToyDecoder::forward_step(const DecoderState& carried,
                                       const Matrix& new_clip,
                                       const Matrix& text_pre,
                                       const Matrix& text_post,
                                       DecoderTrace* trace) const {
    return run(&carried, {new_clip}, text_pre, text_post, trace);
}

DecoderResult ToyDecoder::run(const DecoderState* carried,
                              const std::vector<Matrix>& new_clips,
                              const Matrix& text_pre, const Matrix& text_post,
                              DecoderTrace* trace) const {
    const AggregationSchedule& sched = cfg_.schedule;
    const std::size_t d = static_cast<std::size_t>(sched.d);
    const int L = sched.layers;
    const int cap = cfg_.rules.max_levels;

    auto check_text = [&](const Matrix& m, const char* what) {
        if (m.rows > 0 && m.cols != d)
            throw ShapeError(std::string(what) + " width " +
                             std::to_string(m.cols) + " != d=" +
                             std::to_string(d));
        if (!m.is_finite()) throw NonFiniteError(std::string(what) + " not finite");
    };
    check_text(text_pre, "text_pre");
    check_text(text_post, "text_post");
    for (const Matrix& clip : new_clips) {
        if (clip.cols != d)
            throw ShapeError("clip width " + std::to_string(clip.cols) +
                             " != d=" + std::to_string(d));
        if (!clip.is_finite()) throw NonFiniteError("clip tokens not finite");
    }

    const std::size_t n_old = carried ? carried->clips.size() : 0;
    std::vector<std::size_t> clip_tokens;
    for (std::size_t i = 0; i < n_old; ++i)
        clip_tokens.push_back(carried->clips[i].n_v);
    for (const Matrix& clip : new_clips) clip_tokens.push_back(clip.rows);

    const SequenceLayout layout =
        layout_for(clip_tokens, text_pre.rows, text_post.rows);
    const auto ins = sched.insertion_layers();

    Matrix h(layout.total, d);
    insert_rows(h, 0, text_pre);
    for (std::size_t i = 0; i < new_clips.size(); ++i)
        insert_rows(h, layout.clips[n_old + i].visual_offset, new_clips[i]);
    insert_rows(h, layout.text_post_offset, text_post);

    // Rows this call computes: text rows always, plus the new clips' rows.
    std::vector<char> computed(layout.total, 0);
    for (std::size_t r = 0; r < layout.text_pre_len; ++r) computed[r] = 1;
    for (std::size_t r = layout.text_post_offset;
         r < layout.text_post_offset + layout.text_post_len; ++r)
        computed[r] = 1;
    for (std::size_t i = n_old; i < clip_tokens.size(); ++i) {
        const auto& span = layout.clips[i];
        for (std::size_t r = span.visual_offset;
             r < span.visual_offset + span.visual_len; ++r)
            computed[r] = 1;
        for (int j = 1; j <= 3; ++j)
            for (std::size_t r = span.agg_offset[j - 1];
                 r < span.agg_offset[j - 1] + span.agg_len[j - 1]; ++r)
                computed[r] = 1;
    }

    // Caches being built for the clips this call computes.
    std::vector<CarriedClip> built(new_clips.size());
    for (std::size_t i = 0; i < new_clips.size(); ++i)
        built[i].n_v = new_clips[i].rows;

    // Per-band masks, built once.
    std::array<AttentionMask, 3> band_masks;
    for (int b = 1; b <= 3; ++b)
        band_masks[b - 1] = build_band_mask(layout, std::min(b, cap), cfg_.rules);

    if (trace) {
        trace->layout = layout;
        trace->hidden_in.clear();
        trace->attn_probs.clear();
        trace->attn_out.clear();
        trace->masks.clear();
    }

    std::vector<double> xhat(d), tmp(d), ff(hidden_);
    Matrix keys(layout.total, d), vals(layout.total, d);

    for (int l = 0; l < L; ++l) {
        const int band = std::min(active_level_count(sched, l), cap);

        // Splice: initialize each newly active level of the computed clips
        // from the current hidden values of its source level.
        for (int j = 1; j <= std::min(3, cap); ++j) {
            if (l != ins[j - 1]) continue;
            for (std::size_t i = n_old; i < clip_tokens.size(); ++i) {
                const auto& span = layout.clips[i];
                const Matrix source =
                    (j == 1)
                        ? extract_rows(h, span.visual_offset, span.visual_len)
                        : extract_rows(h, span.agg_offset[j - 2],
                                       span.agg_len[j - 2]);
                insert_rows(h, span.agg_offset[j - 1],
                            adapter_pool(source, span.agg_len[j - 1]));
            }
        }

        // Load cached column values of earlier clips for this layer.
        for (std::size_t i = 0; i < n_old; ++i) {
            const CarriedClip& cc = carried->clips[i];
            const auto& span = layout.clips[i];
            insert_rows(h, span.first_frame_begin,
                        cc.first_frame[static_cast<std::size_t>(l)]);
            for (int j = 1; j <= 3; ++j) {
                const Matrix& snap = cc.agg[j - 1][static_cast<std::size_t>(l)];
                if (snap.rows > 0) insert_rows(h, span.agg_offset[j - 1], snap);
            }
        }

        // Snapshot what attention at this layer sees of the computed clips.
        for (std::size_t i = 0; i < new_clips.size(); ++i) {
            const auto& span = layout.clips[n_old + i];
            built[i].first_frame.push_back(extract_rows(
                h, span.first_frame_begin, layout.tokens_per_frame));
            for (int j = 1; j <= 3; ++j)
                built[i].agg[j - 1].push_back(
                    (j <= band)
                        ? extract_rows(h, span.agg_offset[j - 1],
                                       span.agg_len[j - 1])
                        : Matrix(0, d));
        }

        const AttentionMask& mask = band_masks[band - 1];
        const LayerWeights& lw = layers_[static_cast<std::size_t>(l)];

        if (trace) {
            trace->hidden_in.push_back(h);
            trace->masks.push_back(mask);
            trace->attn_probs.emplace_back(layout.total, layout.total);
            trace->attn_out.emplace_back(layout.total, d);
        }

        // Keys and values for every column. Columns of earlier clips that are
        // not cached hold zeros and are invisible to every computed row.
        for (std::size_t c = 0; c < layout.total; ++c) {
            layer_norm(h.row(c), d, lw.ln1_g, lw.ln1_b, xhat.data());
            row_times(xhat.data(), lw.wk, keys.row(c));
            row_times(xhat.data(), lw.wv, vals.row(c));
        }

        Matrix h_next = h;
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        std::vector<double> q(d), scores;
        std::vector<std::size_t> cols;

        for (std::size_t r = 0; r < layout.total; ++r) {
            if (!computed[r]) continue;
            // Rows of not-yet-inserted levels are inactive: skip them (their
            // mask row is empty).
            bool any = false;
            scores.clear();
            cols.clear();
            layer_norm(h.row(r), d, lw.ln1_g, lw.ln1_b, xhat.data());
            row_times(xhat.data(), lw.wq, q.data());
            for (std::size_t c = 0; c <= r; ++c) {
                if (!mask.at(r, c)) continue;
                any = true;
                double s = 0.0;
                const double* krow = keys.row(c);
                for (std::size_t i = 0; i < d; ++i) s += q[i] * krow[i];
                scores.push_back(s * scale);
                cols.push_back(c);
            }
            if (!any) continue;

            double mx = scores[0];
            for (double s : scores) mx = std::max(mx, s);
            double denom = 0.0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                denom += s;
            }
            std::vector<double> mix(d, 0.0);
            for (std::size_t idx = 0; idx < cols.size(); ++idx) {
                const double alpha = scores[idx] / denom;
                if (trace) trace->attn_probs.back().at(r, cols[idx]) = alpha;
                const double* vrow = vals.row(cols[idx]);
                for (std::size_t i = 0; i < d; ++i) mix[i] += alpha * vrow[i];
            }
            row_times(mix.data(), lw.wo, tmp.data());
            if (trace)
                for (std::size_t i = 0; i < d; ++i)
                    trace->attn_out.back().at(r, i) = tmp[i];

            double* out = h_next.row(r);
            for (std::size_t i = 0; i < d; ++i) out[i] = h.at(r, i) + tmp[i];

            // Pointwise feed-forward with its own pre-norm.
            layer_norm(out, d, lw.ln2_g, lw.ln2_b, xhat.data());
            row_times(xhat.data(), lw.w1, ff.data());
            for (std::size_t i = 0; i < hidden_; ++i)
                ff[i] = gelu(ff[i] + lw.b1[i]);
            row_times(ff.data(), lw.w2, tmp.data());
            for (std::size_t i = 0; i < d; ++i) out[i] += tmp[i] + lw.b2[i];

            for (std::size_t i = 0; i < d; ++i)
                if (!std::isfinite(out[i]))
                    throw NonFiniteError("hidden state diverged at layer " +
                                         std::to_string(l));
        }
        h = std::move(h_next);
    }

    // Final-layer snapshots and summaries for the computed clips.
    for (std::size_t i = 0; i < new_clips.size(); ++i) {
        const auto& span = layout.clips[n_old + i];
        built[i].first_frame.push_back(
            extract_rows(h, span.first_frame_begin, layout.tokens_per_frame));
        for (int j = 1; j <= 3; ++j)
            built[i].agg[j - 1].push_back(
                (j <= cap) ? extract_rows(h, span.agg_offset[j - 1],
                                          span.agg_len[j - 1])
                           : Matrix(0, d));
        built[i].summary =
            extract_rows(h, span.agg_offset[cap - 1], span.agg_len[cap - 1]);
    }

    DecoderResult result;
    if (carried) result.state.clips = carried->clips;
    for (CarriedClip& cc : built) result.state.clips.push_back(std::move(cc));

    const std::size_t text_rows = layout.text_pre_len + layout.text_post_len;
    result.text_logits =
        Matrix(text_rows, static_cast<std::size_t>(cfg_.vocab_size));
    std::size_t out_row = 0;
    auto emit_logits = [&](std::size_t begin, std::size_t len) {
        for (std::size_t r = begin; r < begin + len; ++r, ++out_row) {
            layer_norm(h.row(r), d, lnf_g, lnf_b, xhat.data());
            row_times(xhat.data(), unembed_, result.text_logits.row(out_row));
        }
    };
    emit_logits(0, layout.text_pre_len);
    emit_logits(layout.text_post_offset, layout.text_post_len);
    return result;
}

}  // namespace oncue
