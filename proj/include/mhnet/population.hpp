#pragma once

#include "mhnet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mhnet {

struct PhenotypeRecord {
    std::string subject_id;
    std::string gender;
    double age = 0.0;
    std::string site;
};

/// Sorted category lists observed across a set of records.
struct PhenotypeVocabulary {
    std::vector<std::string> genders;
    std::vector<std::string> sites;

    static PhenotypeVocabulary from_records(const std::vector<PhenotypeRecord>& records);
};

/// Columns subject_id, gender, age, site (header required, any column order).
std::vector<PhenotypeRecord> read_phenotypes_csv(const std::filesystem::path& path);
void write_phenotypes_csv(const std::vector<PhenotypeRecord>& records, const std::filesystem::path& path);
/// Reorders records to match ids; throws if any id has no record.
std::vector<PhenotypeRecord> align_phenotypes(const std::vector<PhenotypeRecord>& records,
                                              const std::vector<std::string>& ids);

/// Row i is the eval-mode fused feature vector of subject i.
Tensor embed_subjects(MhNet& model, const std::vector<SubjectInputs>& inputs);

/// exp(-rho^2 / (2 sigma^2)) with rho = 1 - Pearson(Y_i, Y_j) and sigma^2 the mean of rho^2 over pairs i < j.
Tensor similarity_m1(const Tensor& y, const std::vector<std::string>& ids = {});
/// Mean of gender agreement, site agreement and exp(-(age_i - age_j)^2 / 50).
Tensor phenotype_similarity_m2(const std::vector<PhenotypeRecord>& records);
/// z-scored age followed by one-hot gender and one-hot site.
Tensor phenotype_features(const std::vector<PhenotypeRecord>& records, const PhenotypeVocabulary& vocab);

/// Shared phenotype MLP [f -> 16 -> 8] under prefix.
void add_phenotype_mlp(ad::ParamStore& params, const std::string& prefix, std::size_t in_width, Rng& rng);
/// (cos(MLP(eta_i), MLP(eta_j)) + 1) / 2.
ad::Var weight_matrix(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var eta);

struct PopulationAdjacency {
    Tensor c_prime;
    Tensor c;
    Tensor a;
};

/// C' = M1 * M2; C keeps the top retain_fraction of off-diagonal C' entries
/// (ties at the cut are kept) plus the diagonal; A' = C * W.
PopulationAdjacency population_adjacency(const Tensor& m1, const Tensor& m2, const Tensor& w, double retain_fraction);
Tensor binarize_top(const Tensor& c_prime, double retain_fraction);

struct PopulationConfig {
    std::size_t gcn_hidden = 32;
    std::vector<std::size_t> head_hidden{16};
    double retain_fraction = 0.10;
    double lr = 1e-2;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
};

/// GCN layer plus MLP head over the population graph.
class PopulationModel {
public:
    PopulationModel(std::size_t embed_width, std::size_t phenotype_width, PopulationConfig config);

    /// relu(D^-1/2 (A' + I) D^-1/2 Y W_g + b), then MLP + softmax per row -> [m x 2].
    ad::Var classify(ad::Tape& tape, ad::Var y, ad::Var a_prime);
    /// The same stack without propagation (the A' = I reduction).
    ad::Var classify_without_graph(ad::Tape& tape, ad::Var y);
    /// A' = C * W(eta) on the tape so the phenotype MLP is trained with the head.
    ad::Var adjacency(ad::Tape& tape, const Tensor& c, ad::Var eta);

    ad::ParamStore& params() { return params_; }
    const PopulationConfig& config() const { return config_; }

private:
    ad::Var head(ad::Tape& tape, ad::Var propagated);

    PopulationConfig config_;
    ad::ParamStore params_;
};

struct PopulationResult {
    /// Positive-class probability of every subject.
    std::vector<double> scores;
    std::vector<double> loss_trace;
    PopulationAdjacency graph;
};

/// Transductive training on the labeled rows; every row gets a score.
PopulationResult fit_population(const Tensor& y, const std::vector<PhenotypeRecord>& records,
                                const std::vector<int>& labels, const std::vector<std::size_t>& train_idx,
                                const PopulationConfig& config);

} // namespace mhnet
