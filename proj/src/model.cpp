#include "mfrec/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mfrec/rng.hpp"

namespace mfrec {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace

const char* to_string(Variant v) {
    switch (v) {
        case Variant::BiasSVD: return "biassvd";
        case Variant::MF: return "mf";
        case Variant::SVDpp: return "svdpp";
        case Variant::USVDpp: return "usvdpp";
        case Variant::ISVDpp: return "isvdpp";
        case Variant::UISVDpp: return "uisvdpp";
    }
    return "?";
}

const char* display_name(Variant v) {
    switch (v) {
        case Variant::BiasSVD: return "Bias_SVD";
        case Variant::MF: return "PMF (MAP)";
        case Variant::SVDpp: return "SVD++";
        case Variant::USVDpp: return "USVD++";
        case Variant::ISVDpp: return "ISVD++";
        case Variant::UISVDpp: return "UISVD++";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    for (Variant v : {Variant::BiasSVD, Variant::MF, Variant::SVDpp, Variant::USVDpp,
                      Variant::ISVDpp, Variant::UISVDpp}) {
        if (s == to_string(v)) return v;
    }
    throw std::invalid_argument("unknown model variant: " + s);
}

const char* to_string(AttrNorm n) {
    return n == AttrNorm::Active ? "active" : "global";
}

AttrNorm attr_norm_from_string(const std::string& s) {
    if (s == "active") return AttrNorm::Active;
    if (s == "global") return AttrNorm::Global;
    throw std::invalid_argument("unknown attribute normalizer: " + s);
}

const char* to_string(PredictionMode m) {
    switch (m) {
        case PredictionMode::Full: return "full";
        case PredictionMode::ColdUser: return "cold-user";
        case PredictionMode::ColdItem: return "cold-item";
        case PredictionMode::ColdBoth: return "cold-both";
        case PredictionMode::GlobalMean: return "global-mean-fallback";
    }
    return "?";
}

void HyperParams::validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
    if (std::abs(alpha + beta - 1.0) > 1e-12)
        throw std::invalid_argument("alpha + beta must equal 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (init_stddev < 0.0) throw std::invalid_argument("init stddev must be >= 0");
}

bool Mat::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool ModelParams::all_finite() const {
    auto vec_ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return std::isfinite(mu) && vec_ok(b_user) && vec_ok(b_item) && P.all_finite() &&
           Q.all_finite() && Y_impl.all_finite() && Y_age.all_finite() && Y_genre.all_finite();
}

double Model::age_norm(std::int32_t u) const {
    if (hp.attr_norm == AttrNorm::Global) return 1.0 / static_cast<double>(kAgeBucketCount);
    const auto& attrs = user_attrs[static_cast<std::size_t>(u)];
    return attrs.empty() ? 0.0 : 1.0 / static_cast<double>(attrs.size());
}

double Model::genre_norm(std::int32_t i) const {
    const auto& attrs = item_attrs[static_cast<std::size_t>(i)];
    if (attrs.empty()) return 0.0;
    if (hp.attr_norm == AttrNorm::Global) return 1.0 / static_cast<double>(vocab.size());
    return 1.0 / static_cast<double>(attrs.size());
}

double Model::impl_scale(std::int32_t u) const {
    const auto& items = user_items[static_cast<std::size_t>(u)];
    if (items.empty()) return 0.0;
    return 1.0 / std::sqrt(static_cast<double>(items.size()));
}

void Model::age_profile(std::int32_t u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double w = age_norm(u);
    for (std::int32_t a : user_attrs[static_cast<std::size_t>(u)])
        axpy(w, params.Y_age.row(a), out);
}

void Model::implicit_profile(std::int32_t u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double w = impl_scale(u);
    for (std::int32_t j : user_items[static_cast<std::size_t>(u)])
        axpy(w, params.Y_impl.row(j), out);
}

void Model::genre_profile(std::int32_t i, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double w = genre_norm(i);
    for (std::int32_t t : item_attrs[static_cast<std::size_t>(i)])
        axpy(w, params.Y_genre.row(t), out);
}

void Model::compose_user(std::int32_t u, std::span<double> out) const {
    const auto pu = params.P.row(u);
    std::copy(pu.begin(), pu.end(), out.begin());
    if (use_age()) {
        const double w = hp.alpha * age_norm(u);
        for (std::int32_t a : user_attrs[static_cast<std::size_t>(u)])
            axpy(w, params.Y_age.row(a), out);
    }
    if (use_impl()) {
        const double w = hp.beta * impl_scale(u);
        for (std::int32_t j : user_items[static_cast<std::size_t>(u)])
            axpy(w, params.Y_impl.row(j), out);
    }
}

void Model::compose_item(std::int32_t i, std::span<double> out) const {
    const auto qi = params.Q.row(i);
    std::copy(qi.begin(), qi.end(), out.begin());
    if (use_genre()) {
        const double w = genre_norm(i);
        for (std::int32_t t : item_attrs[static_cast<std::size_t>(i)])
            axpy(w, params.Y_genre.row(t), out);
    }
}

double Model::predict_raw(std::int32_t u, std::int32_t i) const {
    thread_local std::vector<double> ubuf, ibuf;
    ubuf.resize(static_cast<std::size_t>(hp.k));
    ibuf.resize(static_cast<std::size_t>(hp.k));
    compose_user(u, ubuf);
    compose_item(i, ibuf);
    double v = dot(ubuf, ibuf);
    if (use_bias())
        v += params.mu + params.b_user[static_cast<std::size_t>(u)] +
             params.b_item[static_cast<std::size_t>(i)];
    return v;
}

static double clamp_rating(double v) { return std::clamp(v, 1.0, 5.0); }

Prediction Model::predict_dense(std::int32_t u, std::int32_t i) const {
    const double v = predict_raw(u, i);
    return Prediction{v, clamp_rating(v)};
}

Prediction Model::predict(std::int64_t user_ext, std::int64_t item_ext) const {
    auto uit = user_index.find(user_ext);
    if (uit == user_index.end())
        throw DataError("unknown user id " + std::to_string(user_ext));
    auto iit = item_index.find(item_ext);
    if (iit == item_index.end())
        throw DataError("unknown item id " + std::to_string(item_ext));
    return predict_dense(uit->second, iit->second);
}

ColdPrediction Model::predict_query(std::optional<std::int64_t> user_ext,
                                    std::optional<int> age,
                                    std::optional<std::int64_t> item_ext,
                                    const std::vector<std::string>* genre_names) const {
    enum class Side { Known, Attr, None };
    const std::size_t kk = static_cast<std::size_t>(hp.k);
    std::vector<double> uvec(kk, 0.0), ivec(kk, 0.0);
    double bu = 0.0, bi = 0.0;

    Side user_side = Side::None;
    if (user_ext) {
        auto it = user_index.find(*user_ext);
        if (it != user_index.end()) {
            compose_user(it->second, uvec);
            bu = params.b_user[static_cast<std::size_t>(it->second)];
            user_side = Side::Known;
        }
    }
    if (user_side != Side::Known && age) {
        if (*age < 1) throw DataError("age must be >= 1");
        // unseen user: b_u, p_u and the implicit term are zero, the age
        // profile alone carries the prediction
        if (use_age()) {
            const auto attrs = active_age_attributes(*age, hp.age_encoding);
            const double norm = hp.attr_norm == AttrNorm::Global
                                    ? 1.0 / static_cast<double>(kAgeBucketCount)
                                    : 1.0 / static_cast<double>(attrs.size());
            for (std::int32_t a : attrs) axpy(hp.alpha * norm, params.Y_age.row(a), uvec);
        }
        user_side = Side::Attr;
    }

    Side item_side = Side::None;
    if (item_ext) {
        auto it = item_index.find(*item_ext);
        if (it != item_index.end()) {
            compose_item(it->second, ivec);
            bi = params.b_item[static_cast<std::size_t>(it->second)];
            item_side = Side::Known;
        }
    }
    if (item_side != Side::Known && genre_names && !genre_names->empty()) {
        if (use_genre()) {
            std::vector<std::int32_t> attrs;
            for (const std::string& name : *genre_names) {
                const int idx = vocab.index_of(name);
                if (idx < 0) throw DataError("unknown genre '" + name + "'");
                attrs.push_back(idx);
            }
            const double norm = hp.attr_norm == AttrNorm::Global
                                    ? 1.0 / static_cast<double>(vocab.size())
                                    : 1.0 / static_cast<double>(attrs.size());
            for (std::int32_t t : attrs) axpy(norm, params.Y_genre.row(t), ivec);
        }
        item_side = Side::Attr;
    }

    if (user_side == Side::None && item_side == Side::None) {
        return ColdPrediction{Prediction{params.mu, clamp_rating(params.mu)},
                              PredictionMode::GlobalMean};
    }

    double v = dot(uvec, ivec);
    if (use_bias()) v += params.mu + bu + bi;

    PredictionMode mode = PredictionMode::Full;
    if (user_side == Side::Known && item_side != Side::Known) mode = PredictionMode::ColdItem;
    else if (user_side != Side::Known && item_side == Side::Known) mode = PredictionMode::ColdUser;
    else if (user_side != Side::Known && item_side != Side::Known) mode = PredictionMode::ColdBoth;

    return ColdPrediction{Prediction{v, clamp_rating(v)}, mode};
}

Model make_model(const HyperParams& hp, const Dataset& train) {
    hp.validate();
    if (train.num_ratings() == 0) throw std::invalid_argument("empty training set");

    const Tables& t = train.tables();
    Model m;
    m.hp = hp;
    m.dataset_name = t.name;
    m.vocab = t.vocab;
    m.user_index = t.user_index;
    m.item_index = t.item_index;
    m.user_ids.reserve(t.users.size());
    m.user_age.reserve(t.users.size());
    m.user_attrs.reserve(t.users.size());
    for (const UserProfile& u : t.users) {
        m.user_ids.push_back(u.user_id);
        m.user_age.push_back(u.age);
        m.user_attrs.push_back(active_age_attributes(u.age, hp.age_encoding));
    }
    m.item_ids.reserve(t.items.size());
    m.item_flags.reserve(t.items.size());
    m.item_attrs.reserve(t.items.size());
    for (const ItemProfile& p : t.items) {
        m.item_ids.push_back(p.item_id);
        m.item_flags.push_back(p.genre_flags);
        m.item_attrs.push_back(active_genre_attributes(p.genre_flags));
    }
    m.user_items = train.rated_items();

    const int users = train.num_users();
    const int items = train.num_items();
    ModelParams& pr = m.params;
    pr.mu = train.mean_rating();
    pr.b_user.assign(static_cast<std::size_t>(users), 0.0);
    pr.b_item.assign(static_cast<std::size_t>(items), 0.0);
    pr.P = Mat(users, hp.k);
    pr.Q = Mat(items, hp.k);
    pr.Y_impl = Mat(items, hp.k);
    pr.Y_age = Mat(kAgeBucketCount, hp.k);
    pr.Y_genre = Mat(m.vocab.size(), hp.k);

    Rng rng(hp.seed);
    for (Mat* mat : {&pr.P, &pr.Q, &pr.Y_impl, &pr.Y_age, &pr.Y_genre}) {
        for (double& v : mat->data()) v = rng.normal(0.0, hp.init_stddev);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Serialization. Little-endian binary, bit-exact round trip.

static_assert(std::endian::native == std::endian::little,
              "model files assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'F', 'R', 'E', 'C', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kEndMarker = 0x444E454D;  // "MEND"

struct Writer {
    std::ofstream out;
    explicit Writer(const std::filesystem::path& p) : out(p, std::ios::binary) {
        if (!out) throw ModelIOError("cannot open " + p.string() + " for writing");
    }
    void bytes(const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out) throw ModelIOError("write failed");
    }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void i32(std::int32_t v) { bytes(&v, sizeof v); }
    void i64(std::int64_t v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void f64s(const std::vector<double>& v) { bytes(v.data(), v.size() * sizeof(double)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    std::ifstream in;
    explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary) {
        if (!in) throw ModelIOError("cannot open model file " + p.string());
    }
    void bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw ModelIOError("truncated model file");
    }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, sizeof v); return v; }
    std::int32_t i32() { std::int32_t v; bytes(&v, sizeof v); return v; }
    std::int64_t i64() { std::int64_t v; bytes(&v, sizeof v); return v; }
    double f64() { double v; bytes(&v, sizeof v); return v; }
    void f64s(std::vector<double>& v) { bytes(v.data(), v.size() * sizeof(double)); }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw ModelIOError("corrupt string length in model file");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
    if (!m.params.all_finite())
        throw ModelIOError("refusing to save non-finite model parameters");
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(m.hp.variant));
    w.u32(static_cast<std::uint32_t>(m.hp.age_encoding));
    w.u32(static_cast<std::uint32_t>(m.hp.attr_norm));
    w.u32(static_cast<std::uint32_t>(m.hp.k));
    w.u32(static_cast<std::uint32_t>(m.hp.epochs));
    w.u64(m.hp.seed);
    w.f64(m.hp.gamma);
    w.f64(m.hp.lambda);
    w.f64(m.hp.alpha);
    w.f64(m.hp.beta);
    w.f64(m.hp.init_stddev);
    w.f64(m.params.mu);
    w.u32(static_cast<std::uint32_t>(m.num_users()));
    w.u32(static_cast<std::uint32_t>(m.num_items()));
    w.u32(static_cast<std::uint32_t>(kAgeBucketCount));
    w.u32(static_cast<std::uint32_t>(m.vocab.size()));
    w.str(m.dataset_name);
    for (const std::string& name : m.vocab.names) w.str(name);
    for (int u = 0; u < m.num_users(); ++u) {
        w.i64(m.user_ids[static_cast<std::size_t>(u)]);
        w.i32(m.user_age[static_cast<std::size_t>(u)]);
        const auto& items = m.user_items[static_cast<std::size_t>(u)];
        w.u32(static_cast<std::uint32_t>(items.size()));
        for (std::int32_t j : items) w.i32(j);
    }
    for (int i = 0; i < m.num_items(); ++i) {
        w.i64(m.item_ids[static_cast<std::size_t>(i)]);
        const auto& flags = m.item_flags[static_cast<std::size_t>(i)];
        w.bytes(flags.data(), flags.size());
    }
    w.f64s(m.params.b_user);
    w.f64s(m.params.b_item);
    w.f64s(m.params.P.data());
    w.f64s(m.params.Q.data());
    w.f64s(m.params.Y_impl.data());
    w.f64s(m.params.Y_age.data());
    w.f64s(m.params.Y_genre.data());
    w.u32(kEndMarker);
    w.out.close();
    if (!w.out) throw ModelIOError("failed to finish writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ModelIOError(path.string() + " is not a model file");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw ModelIOError("unsupported model file version " + std::to_string(version));

    Model m;
    m.hp.variant = static_cast<Variant>(r.u32());
    m.hp.age_encoding = static_cast<AgeEncoding>(r.u32());
    m.hp.attr_norm = static_cast<AttrNorm>(r.u32());
    m.hp.k = static_cast<int>(r.u32());
    m.hp.epochs = static_cast<int>(r.u32());
    m.hp.seed = r.u64();
    m.hp.gamma = r.f64();
    m.hp.lambda = r.f64();
    m.hp.alpha = r.f64();
    m.hp.beta = r.f64();
    m.hp.init_stddev = r.f64();
    m.params.mu = r.f64();
    const std::uint32_t users = r.u32();
    const std::uint32_t items = r.u32();
    const std::uint32_t buckets = r.u32();
    const std::uint32_t genres = r.u32();
    if (buckets != kAgeBucketCount)
        throw ModelIOError("model file declares " + std::to_string(buckets) +
                           " age buckets, expected " + std::to_string(kAgeBucketCount));
    if (m.hp.k < 1 || m.hp.k > (1 << 16)) throw ModelIOError("corrupt latent dimension");
    m.dataset_name = r.str();
    m.vocab.names.resize(genres);
    for (auto& name : m.vocab.names) name = r.str();

    m.user_ids.resize(users);
    m.user_age.resize(users);
    m.user_items.resize(users);
    m.user_attrs.resize(users);
    for (std::uint32_t u = 0; u < users; ++u) {
        m.user_ids[u] = r.i64();
        m.user_age[u] = r.i32();
        const std::uint32_t cnt = r.u32();
        if (cnt > items) throw ModelIOError("corrupt rated-item count");
        m.user_items[u].resize(cnt);
        for (auto& j : m.user_items[u]) {
            j = r.i32();
            if (j < 0 || static_cast<std::uint32_t>(j) >= items)
                throw ModelIOError("corrupt rated-item index");
        }
        m.user_attrs[u] = active_age_attributes(m.user_age[u], m.hp.age_encoding);
        m.user_index.emplace(m.user_ids[u], static_cast<std::int32_t>(u));
    }
    m.item_ids.resize(items);
    m.item_flags.resize(items);
    m.item_attrs.resize(items);
    for (std::uint32_t i = 0; i < items; ++i) {
        m.item_ids[i] = r.i64();
        m.item_flags[i].resize(genres);
        r.bytes(m.item_flags[i].data(), genres);
        m.item_attrs[i] = active_genre_attributes(m.item_flags[i]);
        m.item_index.emplace(m.item_ids[i], static_cast<std::int32_t>(i));
    }

    m.params.b_user.resize(users);
    m.params.b_item.resize(items);
    m.params.P = Mat(static_cast<int>(users), m.hp.k);
    m.params.Q = Mat(static_cast<int>(items), m.hp.k);
    m.params.Y_impl = Mat(static_cast<int>(items), m.hp.k);
    m.params.Y_age = Mat(kAgeBucketCount, m.hp.k);
    m.params.Y_genre = Mat(static_cast<int>(genres), m.hp.k);
    r.f64s(m.params.b_user);
    r.f64s(m.params.b_item);
    r.f64s(m.params.P.data());
    r.f64s(m.params.Q.data());
    r.f64s(m.params.Y_impl.data());
    r.f64s(m.params.Y_age.data());
    r.f64s(m.params.Y_genre.data());
    if (r.u32() != kEndMarker) throw ModelIOError("corrupt model file trailer");
    char extra;
    r.in.read(&extra, 1);
    if (r.in.gcount() != 0) throw ModelIOError("trailing bytes after model payload");
    return m;
}

}  // namespace mfrec
