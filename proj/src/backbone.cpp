#include "morec/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "morec/rng.hpp"

namespace morec {

namespace {

constexpr double kProbFloor = 1e-7;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_index(int idx, int bound, const char* what) {
    if (idx < 0 || idx >= bound)
        throw std::out_of_range(std::string(what) + " index out of range: " + std::to_string(idx));
}

}  // namespace

double MfModel::score(int user, int item) const {
    check_index(user, n_users, "user");
    check_index(item, n_items, "item");
    const double* u = user_row(user);
    const double* v = item_row(item);
    double s = use_bias ? item_bias[item] : 0.0;
    for (int t = 0; t < dim; ++t) s += u[t] * v[t];
    return s;
}

MfModel make_model(int n_users, int n_items, int dim, bool use_bias, double init_std,
                   std::uint64_t seed) {
    if (n_users < 1 || n_items < 1 || dim < 1)
        throw std::invalid_argument("make_model: sizes must be positive");
    MfModel m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.dim = dim;
    m.use_bias = use_bias;
    m.user_emb.resize(static_cast<std::size_t>(n_users) * dim);
    m.item_emb.resize(static_cast<std::size_t>(n_items) * dim);
    m.item_bias.assign(n_items, 0.0);
    auto g = rng::substream(seed, "model_init");
    rng::Normal normal;
    for (double& v : m.user_emb) v = normal(g) * init_std;
    for (double& v : m.item_emb) v = normal(g) * init_std;
    return m;
}

SampleLossResult sample_loss(const MfModel& model, int user, int pos_item,
                             std::span<const int> negatives, LossMode mode) {
    if (negatives.empty()) throw std::invalid_argument("sample_loss: negatives must be non-empty");
    for (int neg : negatives)
        if (neg == pos_item)
            throw std::invalid_argument("sample_loss: negative equals positive item");

    SampleLossResult out;
    out.grad.d_neg.assign(negatives.size(), 0.0);
    const double s_pos = model.score(user, pos_item);

    if (mode == LossMode::bpr) {
        const double inv_n = 1.0 / static_cast<double>(negatives.size());
        for (std::size_t j = 0; j < negatives.size(); ++j) {
            const double diff = s_pos - model.score(user, negatives[j]);
            const double p = sigmoid(diff);
            const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
            out.loss += -std::log(pc) * inv_n;
            if (p > kProbFloor && p < 1.0 - kProbFloor) {
                const double d = (p - 1.0) * inv_n;  // d(-ln sigma(diff))/d diff
                out.grad.d_pos += d;
                out.grad.d_neg[j] -= d;
            }
        }
    } else {
        const double inv_n = 1.0 / static_cast<double>(negatives.size() + 1);
        const double p_pos = sigmoid(s_pos);
        const double pc_pos = std::clamp(p_pos, kProbFloor, 1.0 - kProbFloor);
        out.loss += -std::log(pc_pos) * inv_n;
        if (p_pos > kProbFloor && p_pos < 1.0 - kProbFloor)
            out.grad.d_pos = (p_pos - 1.0) * inv_n;
        for (std::size_t j = 0; j < negatives.size(); ++j) {
            const double p_neg = sigmoid(model.score(user, negatives[j]));
            const double one_minus = std::clamp(1.0 - p_neg, kProbFloor, 1.0 - kProbFloor);
            out.loss += -std::log(one_minus) * inv_n;
            if (p_neg > kProbFloor && p_neg < 1.0 - kProbFloor)
                out.grad.d_neg[j] = p_neg * inv_n;
        }
    }
    if (!std::isfinite(out.loss)) throw std::runtime_error("sample_loss: non-finite loss");
    return out;
}

NegativeSampler::NegativeSampler(const std::vector<std::int64_t>& pop_counts)
    : counts_(pop_counts) {
    cumulative_.resize(counts_.size());
    double running = 0.0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        if (counts_[i] < 0) throw std::invalid_argument("negative popularity count");
        running += static_cast<double>(counts_[i]);
        cumulative_[i] = running;
    }
    total_ = running;
}

std::vector<int> NegativeSampler::sample(int n, std::span<const int> exclude,
                                         std::mt19937_64& g) const {
    if (n < 0) throw std::invalid_argument("sample_negatives: n must be >= 0");
    std::vector<int> out;
    if (n == 0) return out;

    double excluded_mass = 0.0;
    for (int e : exclude)
        if (e >= 0 && e < static_cast<int>(counts_.size()))
            excluded_mass += static_cast<double>(counts_[e]);
    if (total_ - excluded_mass <= 0.0)
        throw std::runtime_error("sample_negatives: no candidate with positive popularity mass");

    out.reserve(n);
    while (static_cast<int>(out.size()) < n) {
        const double r = rng::uniform01(g) * total_;
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
        int idx = static_cast<int>(it - cumulative_.begin());
        if (idx >= static_cast<int>(counts_.size())) idx = static_cast<int>(counts_.size()) - 1;
        if (counts_[idx] <= 0) continue;
        if (std::find(exclude.begin(), exclude.end(), idx) != exclude.end()) continue;
        out.push_back(idx);
    }
    return out;
}

std::vector<int> sample_negatives(const std::vector<std::int64_t>& pop_counts, int n,
                                  std::span<const int> exclude, std::mt19937_64& g) {
    return NegativeSampler(pop_counts).sample(n, exclude, g);
}

void GradientBuffer::resize_like(const MfModel& model) {
    user_emb.assign(model.user_emb.size(), 0.0);
    item_emb.assign(model.item_emb.size(), 0.0);
    item_bias.assign(model.item_bias.size(), 0.0);
}

void GradientBuffer::clear() {
    std::fill(user_emb.begin(), user_emb.end(), 0.0);
    std::fill(item_emb.begin(), item_emb.end(), 0.0);
    std::fill(item_bias.begin(), item_bias.end(), 0.0);
}

void accumulate_score_grad(const MfModel& model, int user, int item, double d_score,
                           double scale, GradientBuffer& out) {
    const double g = d_score * scale;
    if (g == 0.0) return;
    const double* u = model.user_row(user);
    const double* v = model.item_row(item);
    double* gu = out.user_emb.data() + static_cast<std::size_t>(user) * model.dim;
    double* gv = out.item_emb.data() + static_cast<std::size_t>(item) * model.dim;
    for (int t = 0; t < model.dim; ++t) {
        gu[t] += g * v[t];
        gv[t] += g * u[t];
    }
    if (model.use_bias) out.item_bias[item] += g;
}

void accumulate_sample_grad(const MfModel& model, int user, int pos_item,
                            std::span<const int> negatives, const SampleGrad& grad,
                            double scale, GradientBuffer& out) {
    accumulate_score_grad(model, user, pos_item, grad.d_pos, scale, out);
    for (std::size_t j = 0; j < negatives.size(); ++j)
        accumulate_score_grad(model, user, negatives[j], grad.d_neg[j], scale, out);
}

void AdamState::resize_like(const MfModel& model) {
    m_user.assign(model.user_emb.size(), 0.0);
    v_user.assign(model.user_emb.size(), 0.0);
    m_item.assign(model.item_emb.size(), 0.0);
    v_item.assign(model.item_emb.size(), 0.0);
    m_bias.assign(model.item_bias.size(), 0.0);
    v_bias.assign(model.item_bias.size(), 0.0);
}

namespace {

void adam_block(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& m, std::vector<double>& v, const AdamState& s,
                double bc1, double bc2, const char* block) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad[i];
        if (!std::isfinite(g))
            throw std::runtime_error(std::string("apply_gradients: non-finite gradient in ") +
                                     block);
        if (s.weight_decay != 0.0) g += s.weight_decay * param[i];
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

}  // namespace

void apply_gradients(MfModel& model, AdamState& opt, const GradientBuffer& grads) {
    if (grads.user_emb.size() != model.user_emb.size() ||
        grads.item_emb.size() != model.item_emb.size() ||
        grads.item_bias.size() != model.item_bias.size())
        throw std::invalid_argument("apply_gradients: gradient shape mismatch");
    if (opt.m_user.size() != model.user_emb.size()) opt.resize_like(model);

    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    adam_block(model.user_emb, grads.user_emb, opt.m_user, opt.v_user, opt, bc1, bc2, "user_emb");
    adam_block(model.item_emb, grads.item_emb, opt.m_item, opt.v_item, opt, bc1, bc2, "item_emb");
    if (model.use_bias)
        adam_block(model.item_bias, grads.item_bias, opt.m_bias, opt.v_bias, opt, bc1, bc2,
                   "item_bias");
}

std::vector<int> topk_recommend(const MfModel& model, int user, int k,
                                std::span<const int> exclude_sorted) {
    check_index(user, model.n_users, "user");
    const int eligible = model.n_items - static_cast<int>(exclude_sorted.size());
    if (k < 1 || k > eligible)
        throw std::invalid_argument("topk_recommend: k infeasible (" + std::to_string(k) +
                                    " of " + std::to_string(eligible) + " eligible items)");

    std::vector<std::pair<double, int>> scored;
    scored.reserve(model.n_items - exclude_sorted.size());
    for (int e = 0; e < model.n_items; ++e) {
        if (std::binary_search(exclude_sorted.begin(), exclude_sorted.end(), e)) continue;
        scored.emplace_back(model.score(user, e), e);
    }
    const auto better = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    };
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) out[i] = scored[i].second;
    return out;
}

namespace {
constexpr char kCkptMagic[8] = {'M', 'O', 'R', 'E', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void save_checkpoint(const std::string& path, const MfModel& model, std::uint64_t config_digest) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(kCkptMagic, sizeof kCkptMagic);
    write_pod(f, config_digest);
    write_pod(f, static_cast<std::int32_t>(model.n_users));
    write_pod(f, static_cast<std::int32_t>(model.n_items));
    write_pod(f, static_cast<std::int32_t>(model.dim));
    write_pod(f, static_cast<std::int32_t>(model.use_bias ? 1 : 0));
    f.write(reinterpret_cast<const char*>(model.user_emb.data()),
            model.user_emb.size() * sizeof(double));
    f.write(reinterpret_cast<const char*>(model.item_emb.data()),
            model.item_emb.size() * sizeof(double));
    f.write(reinterpret_cast<const char*>(model.item_bias.data()),
            model.item_bias.size() * sizeof(double));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

MfModel load_checkpoint(const std::string& path, std::uint64_t* config_digest) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, sizeof magic);
    if (!f || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
        throw std::runtime_error("not a model checkpoint: " + path);
    std::uint64_t digest = 0;
    std::int32_t n_users = 0, n_items = 0, dim = 0, use_bias = 0;
    read_pod(f, digest);
    read_pod(f, n_users);
    read_pod(f, n_items);
    read_pod(f, dim);
    read_pod(f, use_bias);
    if (!f || n_users < 1 || n_items < 1 || dim < 1)
        throw std::runtime_error("corrupt checkpoint header: " + path);
    MfModel m;
    m.n_users = n_users;
    m.n_items = n_items;
    m.dim = dim;
    m.use_bias = use_bias != 0;
    m.user_emb.resize(static_cast<std::size_t>(n_users) * dim);
    m.item_emb.resize(static_cast<std::size_t>(n_items) * dim);
    m.item_bias.resize(n_items);
    f.read(reinterpret_cast<char*>(m.user_emb.data()), m.user_emb.size() * sizeof(double));
    f.read(reinterpret_cast<char*>(m.item_emb.data()), m.item_emb.size() * sizeof(double));
    f.read(reinterpret_cast<char*>(m.item_bias.data()), m.item_bias.size() * sizeof(double));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    if (config_digest) *config_digest = digest;
    return m;
}

}  // namespace morec
