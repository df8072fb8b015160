#include "sdsim/toylm.hpp"

#include <cmath>

#include "sdsim/rng.hpp"

namespace sdsim {

namespace {

void fill_normal(Mat& m, Rng& rng, double scale) {
    for (auto& v : m.a) v = scale * rng.normal();
}

void fill_gain(std::vector<double>& g, Rng& rng) {
    for (auto& v : g) v = rng.uniform(0.9, 1.1);
}

void rms_norm(const std::vector<double>& x, const std::vector<double>& gain,
              std::vector<double>& out) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + 1e-6);
    out.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

ToyLm::ToyLm(uint64_t seed, int vocab, int dim, int layers, int heads, int max_context)
    : vocab_(vocab), dim_(dim), layers_(layers), heads_(heads), max_context_(max_context),
      seed_(seed) {
    if (vocab < 2) throw SizeError("toylm: vocab must be >= 2");
    if (heads < 1 || dim % heads != 0) {
        throw SizeError("toylm: dim " + std::to_string(dim) + " not divisible by heads " +
                        std::to_string(heads));
    }
    if (layers < 1 || max_context < 1) throw SizeError("toylm: layers and context must be >= 1");

    Rng rng(seed);
    double wscale = 1.0 / std::sqrt(static_cast<double>(dim));
    tok_embed_ = Mat(vocab, dim);
    fill_normal(tok_embed_, rng, 1.0);
    pos_embed_ = Mat(max_context, dim);
    fill_normal(pos_embed_, rng, 0.3);
    layers_v_.resize(layers);
    for (auto& l : layers_v_) {
        l.wq = Mat(dim, dim);
        l.wk = Mat(dim, dim);
        l.wv = Mat(dim, dim);
        l.wo = Mat(dim, dim);
        l.w1 = Mat(dim, 4 * dim);
        l.w2 = Mat(4 * dim, dim);
        fill_normal(l.wq, rng, wscale);
        fill_normal(l.wk, rng, wscale);
        fill_normal(l.wv, rng, wscale);
        fill_normal(l.wo, rng, wscale);
        fill_normal(l.w1, rng, wscale);
        fill_normal(l.w2, rng, 0.5 / std::sqrt(static_cast<double>(4 * dim)));
        l.g1.resize(dim);
        l.g2.resize(dim);
        fill_gain(l.g1, rng);
        fill_gain(l.g2, rng);
    }
    g_final_.resize(dim);
    fill_gain(g_final_, rng);
    head_ = Mat(dim, vocab);
    fill_normal(head_, rng, wscale);
}

ToyLm ToyLm::perturbed(uint64_t seed, double epsilon) const {
    ToyLm out = *this;
    Rng rng(seed);
    auto jitter_mat = [&](Mat& m) {
        for (auto& v : m.a) v += epsilon * rng.normal();
    };
    auto jitter_vec = [&](std::vector<double>& g) {
        for (auto& v : g) v += epsilon * rng.normal();
    };
    jitter_mat(out.tok_embed_);
    jitter_mat(out.pos_embed_);
    for (auto& l : out.layers_v_) {
        jitter_mat(l.wq);
        jitter_mat(l.wk);
        jitter_mat(l.wv);
        jitter_mat(l.wo);
        jitter_mat(l.w1);
        jitter_mat(l.w2);
        jitter_vec(l.g1);
        jitter_vec(l.g2);
    }
    jitter_vec(out.g_final_);
    jitter_mat(out.head_);
    return out;
}

void ToyLm::check_tokens(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw SizeError("toylm: token prefix must be non-empty");
    if (static_cast<int>(tokens.size()) > max_context_) {
        throw SizeError("toylm: context overflow, " + std::to_string(tokens.size()) +
                        " tokens > max context " + std::to_string(max_context_));
    }
    for (int t : tokens) {
        if (t < 0 || t >= vocab_) {
            throw ValueError("toylm: token " + std::to_string(t) + " outside vocab");
        }
    }
}

Mat ToyLm::forward(const std::vector<int>& tokens) const {
    LmSession s(*this);
    s.reset(tokens);
    Mat out(static_cast<int>(tokens.size()), vocab_);
    for (size_t p = 0; p < tokens.size(); ++p) {
        const auto& l = s.logits(p);
        for (int v = 0; v < vocab_; ++v) out.at(static_cast<int>(p), v) = l[v];
    }
    return out;
}

std::vector<int> ToyLm::greedy_decode(const std::vector<int>& prompt, int steps) const {
    LmSession s(*this);
    s.reset(prompt);
    for (int i = 0; i < steps; ++i) {
        int next = s.greedy_at(s.size() - 1);
        int one[] = {next};
        s.extend(one);
    }
    return s.tokens();
}

uint64_t ToyLm::weight_checksum() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, 8);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    for (double v : tok_embed_.a) mix(v);
    for (double v : pos_embed_.a) mix(v);
    for (const auto& l : layers_v_) {
        for (double v : l.wq.a) mix(v);
        for (double v : l.wk.a) mix(v);
        for (double v : l.wv.a) mix(v);
        for (double v : l.wo.a) mix(v);
        for (double v : l.w1.a) mix(v);
        for (double v : l.w2.a) mix(v);
        for (double v : l.g1) mix(v);
        for (double v : l.g2) mix(v);
    }
    for (double v : g_final_) mix(v);
    for (double v : head_.a) mix(v);
    return h;
}

int ToyLm::argmax_lowest(std::span<const double> logits) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return best;
}

LmSession::LmSession(const ToyLm& lm) : lm_(&lm) {
    keys_.resize(lm.layers_);
    values_.resize(lm.layers_);
}

void LmSession::reset(const std::vector<int>& tokens) {
    lm_->check_tokens(tokens);
    truncate(0);
    extend(std::span<const int>(tokens));
}

void LmSession::truncate(size_t len) {
    if (len > tokens_.size()) {
        throw SizeError("lm session: cannot truncate to a longer length");
    }
    tokens_.resize(len);
    logits_.resize(len);
    for (auto& layer : keys_) layer.resize(len);
    for (auto& layer : values_) layer.resize(len);
}

void LmSession::extend(std::span<const int> tokens) {
    for (int t : tokens) {
        if (static_cast<int>(tokens_.size()) >= lm_->max_context_) {
            throw SizeError("lm session: context overflow at " +
                            std::to_string(tokens_.size() + 1) + " tokens");
        }
        if (t < 0 || t >= lm_->vocab_) {
            throw ValueError("lm session: token " + std::to_string(t) + " outside vocab");
        }
        append_token(t);
    }
}

void LmSession::append_token(int token) {
    const ToyLm& lm = *lm_;
    int dim = lm.dim_;
    int heads = lm.heads_;
    int hd = dim / heads;
    size_t pos = tokens_.size();

    std::vector<double> h(dim);
    for (int j = 0; j < dim; ++j) {
        h[j] = lm.tok_embed_.at(token, j) + lm.pos_embed_.at(static_cast<int>(pos), j);
    }

    std::vector<double> normed, q, attn_out, mlp_in;
    for (int li = 0; li < lm.layers_; ++li) {
        const ToyLm::Layer& L = lm.layers_v_[li];
        rms_norm(h, L.g1, normed);
        q = vec_mat(normed, L.wq);
        keys_[li].push_back(vec_mat(normed, L.wk));
        values_[li].push_back(vec_mat(normed, L.wv));
        const auto& ks = keys_[li];
        const auto& vs = values_[li];

        attn_out.assign(dim, 0.0);
        double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
        std::vector<double> scores(pos + 1);
        for (int head = 0; head < heads; ++head) {
            int off = head * hd;
            double mx = -1e300;
            for (size_t j = 0; j <= pos; ++j) {
                double s = 0.0;
                for (int a = 0; a < hd; ++a) s += q[off + a] * ks[j][off + a];
                scores[j] = s * inv_sqrt;
                if (scores[j] > mx) mx = scores[j];
            }
            double z = 0.0;
            for (size_t j = 0; j <= pos; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            for (size_t j = 0; j <= pos; ++j) {
                double p = scores[j] / z;
                for (int a = 0; a < hd; ++a) attn_out[off + a] += p * vs[j][off + a];
            }
        }
        auto proj = vec_mat(attn_out, L.wo);
        for (int j = 0; j < dim; ++j) h[j] += proj[j];

        rms_norm(h, L.g2, mlp_in);
        auto up = vec_mat(mlp_in, L.w1);
        for (auto& v : up) v = silu(v);
        auto down = vec_mat(up, L.w2);
        for (int j = 0; j < dim; ++j) h[j] += down[j];
    }
    rms_norm(h, lm.g_final_, normed);
    logits_.push_back(vec_mat(normed, lm.head_));
    tokens_.push_back(token);
}

}  // namespace sdsim
