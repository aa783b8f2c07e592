#include "mhnet/population.hpp"

#include "mhnet/io.hpp"
#include "mhnet/nn.hpp"
#include "mhnet/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mhnet {

namespace {

std::vector<std::string> split_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
std::vector<std::string> sorted_unique(const std::vector<PhenotypeRecord>& records, T field) {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.*field);
    return {s.begin(), s.end()};
}

std::size_t category_index(const std::vector<std::string>& vocab, const std::string& v, const char* what,
                           const std::string& subject) {
    auto it = std::find(vocab.begin(), vocab.end(), v);
    if (it == vocab.end()) {
        throw std::invalid_argument(std::string("phenotypes: ") + what + " '" + v + "' of subject '" + subject +
                                    "' is not in the vocabulary");
    }
    return static_cast<std::size_t>(it - vocab.begin());
}

void check_record(const PhenotypeRecord& r) {
    if (r.subject_id.empty()) throw std::invalid_argument("phenotypes: record without subject id");
    if (r.gender.empty()) throw std::invalid_argument("phenotypes: subject '" + r.subject_id + "' has no gender");
    if (r.site.empty()) throw std::invalid_argument("phenotypes: subject '" + r.subject_id + "' has no site");
    if (!(r.age > 0.0) || !std::isfinite(r.age)) {
        throw std::invalid_argument("phenotypes: subject '" + r.subject_id + "' has invalid age");
    }
}

} // namespace

PhenotypeVocabulary PhenotypeVocabulary::from_records(const std::vector<PhenotypeRecord>& records) {
    return {sorted_unique(records, &PhenotypeRecord::gender), sorted_unique(records, &PhenotypeRecord::site)};
}

std::vector<PhenotypeRecord> read_phenotypes_csv(const std::filesystem::path& path) {
    std::istringstream in(io::read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
    const auto header = split_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"subject_id", "gender", "age", "site"})
        if (!col.count(name)) throw std::invalid_argument(path.string() + ": missing column '" + name + "'");

    std::vector<PhenotypeRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != header.size()) throw std::invalid_argument(where + ": wrong number of columns");
        PhenotypeRecord r;
        r.subject_id = cells[col["subject_id"]];
        r.gender = cells[col["gender"]];
        r.site = cells[col["site"]];
        const auto& age = cells[col["age"]];
        if (age.empty()) throw std::invalid_argument(where + ": missing age");
        auto [p, ec] = std::from_chars(age.data(), age.data() + age.size(), r.age);
        if (ec != std::errc() || p != age.data() + age.size()) throw std::invalid_argument(where + ": bad age '" + age + "'");
        try {
            check_record(r);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_phenotypes_csv(const std::vector<PhenotypeRecord>& records, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "subject_id,gender,age,site\n";
    for (const auto& r : records) os << r.subject_id << ',' << r.gender << ',' << io::format_double(r.age) << ',' << r.site << '\n';
    io::write_text(path, os.str());
}

std::vector<PhenotypeRecord> align_phenotypes(const std::vector<PhenotypeRecord>& records,
                                              const std::vector<std::string>& ids) {
    std::map<std::string, const PhenotypeRecord*> by_id;
    for (const auto& r : records) by_id[r.subject_id] = &r;
    std::vector<PhenotypeRecord> out;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::invalid_argument("phenotypes: no record for subject '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

Tensor embed_subjects(MhNet& model, const std::vector<SubjectInputs>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("embed_subjects: no subjects");
    const std::size_t w = model.feature_width();
    Tensor y({inputs.size(), w});
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        ad::Tape tape(false);
        Rng rng(0);
        const Tensor& z = model.features(tape, inputs[i], false, rng).value();
        for (std::size_t k = 0; k < w; ++k) y(i, k) = z[k];
    }
    return y;
}

Tensor similarity_m1(const Tensor& y, const std::vector<std::string>& ids) {
    if (y.rank() != 2 || y.dim(0) < 2) throw std::invalid_argument("similarity_m1: need at least two embedding rows");
    const std::size_t m = y.dim(0), e = y.dim(1);
    // Centred unit rows, so Pearson is a dot product.
    Tensor u({m, e});
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t k = 0; k < e; ++k) mean += y(i, k);
        mean /= static_cast<double>(e);
        double ss = 0.0;
        for (std::size_t k = 0; k < e; ++k) ss += (y(i, k) - mean) * (y(i, k) - mean);
        if (!(ss > 0.0)) {
            const std::string who = i < ids.size() ? "subject '" + ids[i] + "'" : "row " + std::to_string(i);
            throw std::invalid_argument("similarity_m1: embedding of " + who + " is constant");
        }
        const double inv = 1.0 / std::sqrt(ss);
        for (std::size_t k = 0; k < e; ++k) u(i, k) = (y(i, k) - mean) * inv;
    }
    Tensor rho2({m, m});
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double r = 0.0;
            for (std::size_t k = 0; k < e; ++k) r += u(i, k) * u(j, k);
            const double rho = 1.0 - std::clamp(r, -1.0, 1.0);
            rho2(i, j) = rho2(j, i) = rho * rho;
            sum += rho * rho;
        }
    const double sigma2 = sum / static_cast<double>(m * (m - 1) / 2);
    Tensor m1({m, m}, 1.0);
    if (sigma2 == 0.0) return m1;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) m1(i, j) = m1(j, i) = std::exp(-rho2(i, j) / (2.0 * sigma2));
    return m1;
}

Tensor phenotype_similarity_m2(const std::vector<PhenotypeRecord>& records) {
    const std::size_t m = records.size();
    if (m == 0) throw std::invalid_argument("phenotype_similarity_m2: no records");
    for (const auto& r : records) check_record(r);
    Tensor m2({m, m}, 1.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double da = records[i].age - records[j].age;
            const double v = ((records[i].gender == records[j].gender ? 1.0 : 0.0) +
                              (records[i].site == records[j].site ? 1.0 : 0.0) + std::exp(-da * da / 50.0)) /
                             3.0;
            m2(i, j) = m2(j, i) = v;
        }
    return m2;
}

Tensor phenotype_features(const std::vector<PhenotypeRecord>& records, const PhenotypeVocabulary& vocab) {
    const std::size_t m = records.size();
    if (m == 0) throw std::invalid_argument("phenotype_features: no records");
    for (const auto& r : records) check_record(r);
    double mean = 0.0;
    for (const auto& r : records) mean += r.age;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (const auto& r : records) var += (r.age - mean) * (r.age - mean);
    const double sd = std::sqrt(var / static_cast<double>(m));
    const std::size_t f = 1 + vocab.genders.size() + vocab.sites.size();
    Tensor eta({m, f});
    for (std::size_t i = 0; i < m; ++i) {
        const auto& r = records[i];
        eta(i, 0) = sd > 0.0 ? (r.age - mean) / sd : 0.0;
        eta(i, 1 + category_index(vocab.genders, r.gender, "gender", r.subject_id)) = 1.0;
        eta(i, 1 + vocab.genders.size() + category_index(vocab.sites, r.site, "site", r.subject_id)) = 1.0;
    }
    return eta;
}

void add_phenotype_mlp(ad::ParamStore& params, const std::string& prefix, std::size_t in_width, Rng& rng) {
    nn::add_mlp(params, prefix, {in_width, 16, 8}, rng);
}

ad::Var weight_matrix(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var eta) {
    Rng unused(0);
    return ad::cosine_affinity(nn::mlp(tape, params, prefix, 2, eta, 0.0, false, unused));
}

Tensor binarize_top(const Tensor& c_prime, double retain_fraction) {
    if (c_prime.rank() != 2 || c_prime.dim(0) != c_prime.dim(1)) {
        throw std::invalid_argument("binarize_top: square matrix required, got " + shape_string(c_prime.shape()));
    }
    if (!(retain_fraction >= 0.0 && retain_fraction <= 1.0)) {
        throw std::invalid_argument("binarize_top: retain fraction must lie in [0, 1]");
    }
    const std::size_t m = c_prime.dim(0);
    Tensor c = Tensor::identity(m);
    std::vector<double> off;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) off.push_back(c_prime(i, j));
    if (off.empty()) return c;
    const auto k = static_cast<std::size_t>(std::ceil(retain_fraction * static_cast<double>(off.size()) - 1e-9));
    if (k == 0) return c;
    if (k >= off.size()) return Tensor({m, m}, 1.0);
    const auto [lo, hi] = std::minmax_element(off.begin(), off.end());
    if (*lo == *hi) throw std::invalid_argument("population graph: binarization undefined (all C' entries are equal)");
    std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(k - 1), off.end(), std::greater<>());
    const double cut = off[k - 1];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j && c_prime(i, j) >= cut) c(i, j) = 1.0;
    return c;
}

PopulationAdjacency population_adjacency(const Tensor& m1, const Tensor& m2, const Tensor& w, double retain_fraction) {
    if (m1.shape() != m2.shape() || m1.shape() != w.shape()) {
        throw std::invalid_argument("population_adjacency: shapes differ (" + shape_string(m1.shape()) + ", " +
                                    shape_string(m2.shape()) + ", " + shape_string(w.shape()) + ")");
    }
    PopulationAdjacency out;
    out.c_prime = Tensor(m1.shape());
    for (std::size_t i = 0; i < m1.size(); ++i) out.c_prime[i] = m1[i] * m2[i];
    out.c = binarize_top(out.c_prime, retain_fraction);
    out.a = Tensor(m1.shape());
    for (std::size_t i = 0; i < m1.size(); ++i) out.a[i] = out.c[i] * w[i];
    return out;
}

PopulationModel::PopulationModel(std::size_t embed_width, std::size_t phenotype_width, PopulationConfig config)
    : config_(std::move(config)) {
    Rng rng = make_stream(config_.seed, "population/init");
    add_phenotype_mlp(params_, "pop.pheno", phenotype_width, rng);
    nn::add_affine(params_, "pop.gcn", embed_width, config_.gcn_hidden, rng);
    std::vector<std::size_t> widths{config_.gcn_hidden};
    widths.insert(widths.end(), config_.head_hidden.begin(), config_.head_hidden.end());
    widths.push_back(2);
    nn::add_mlp(params_, "pop.head", widths, rng);
}

ad::Var PopulationModel::head(ad::Tape& tape, ad::Var propagated) {
    Rng unused(0);
    ad::Var h = ad::relu(nn::affine(tape, params_, "pop.gcn", propagated));
    return ad::softmax(nn::mlp(tape, params_, "pop.head", config_.head_hidden.size() + 1, h, 0.0, false, unused));
}

ad::Var PopulationModel::classify(ad::Tape& tape, ad::Var y, ad::Var a_prime) {
    return head(tape, ad::matmul(ad::gcn_normalize(a_prime), y));
}

ad::Var PopulationModel::classify_without_graph(ad::Tape& tape, ad::Var y) { return head(tape, y); }

ad::Var PopulationModel::adjacency(ad::Tape& tape, const Tensor& c, ad::Var eta) {
    return ad::hadamard(tape.constant(c), weight_matrix(tape, params_, "pop.pheno", eta));
}

PopulationResult fit_population(const Tensor& y, const std::vector<PhenotypeRecord>& records,
                                const std::vector<int>& labels, const std::vector<std::size_t>& train_idx,
                                const PopulationConfig& config) {
    const std::size_t m = y.dim(0);
    if (records.size() != m || labels.size() != m) {
        throw std::invalid_argument("fit_population: embeddings, records and labels differ in length");
    }
    if (train_idx.empty()) throw std::invalid_argument("fit_population: no labeled subjects");

    PopulationResult result;
    const Tensor m1 = similarity_m1(y);
    const Tensor m2 = phenotype_similarity_m2(records);
    const Tensor eta = phenotype_features(records, PhenotypeVocabulary::from_records(records));
    const Tensor c = binarize_top([&] {
        Tensor cp(m1.shape());
        for (std::size_t i = 0; i < m1.size(); ++i) cp[i] = m1[i] * m2[i];
        return cp;
    }(), config.retain_fraction);

    // Column z-scores keep the GCN input on a unit scale.
    Tensor ys = y;
    const std::size_t e = y.dim(1);
    for (std::size_t k = 0; k < e; ++k) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += y(i, k);
        mean /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) var += (y(i, k) - mean) * (y(i, k) - mean);
        const double sd = std::sqrt(var / static_cast<double>(m));
        for (std::size_t i = 0; i < m; ++i) ys(i, k) = sd > 0.0 ? (y(i, k) - mean) / sd : 0.0;
    }

    std::vector<double> weights(m, 0.0);
    for (auto i : train_idx) weights.at(i) = 1.0;

    PopulationModel model(e, eta.dim(1), config);
    AdamState state;
    const AdamOptions adam{config.lr};
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        model.params().zero_grad();
        ad::Tape tape;
        ad::Var a = model.adjacency(tape, c, tape.constant(eta));
        ad::Var loss = ad::cross_entropy(model.classify(tape, tape.constant(ys), a), labels, weights);
        result.loss_trace.push_back(loss.value().item());
        tape.backward(loss);
        adam_step(model.params(), state, adam);
        if (!model.params().all_finite()) throw std::runtime_error("fit_population: non-finite parameter");
    }

    ad::Tape tape(false);
    ad::Var w = weight_matrix(tape, model.params(), "pop.pheno", tape.constant(eta));
    result.graph = population_adjacency(m1, m2, w.value(), config.retain_fraction);
    ad::Var probs = model.classify(tape, tape.constant(ys), tape.constant(result.graph.a));
    result.scores.resize(m);
    for (std::size_t i = 0; i < m; ++i) result.scores[i] = probs.value()(i, 1);
    return result;
}

} // namespace mhnet
