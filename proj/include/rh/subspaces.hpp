#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rh::subspaces {

// Affine map of the box [lower, upper] onto [-1, 1]^m.
class InputScaler {
public:
    InputScaler(Eigen::VectorXd lower, Eigen::VectorXd upper);
    static InputScaler uniform(Eigen::Index m, double lower, double upper);

    Eigen::Index dim() const { return lower_.size(); }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }

    // Values more than 1e-9 outside the box are clipped with a warning.
    Eigen::VectorXd scale(const Eigen::VectorXd& mu) const;
    Eigen::VectorXd unscale(const Eigen::VectorXd& scaled) const;
    // Row-wise versions for N x m sample matrices.
    Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& mu) const;
    Eigen::MatrixXd unscale_rows(const Eigen::MatrixXd& scaled) const;

private:
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
};

// Rows are samples. Inputs and gradients are in scaled coordinates.
struct GradientSampleSet {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd gradients;
    Eigen::VectorXd values;

    Eigen::Index dim() const { return inputs.cols(); }
    Eigen::Index size() const { return inputs.rows(); }
    void validate() const;
};

enum class GradientMethod { ExactCallback, LocalLinear, GlobalLinear };

using GradientCallback = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct GradientOptions {
    GradientMethod method = GradientMethod::LocalLinear;
    int neighbors = 0; // local-linear k; 0 means 2m+1
    GradientCallback callback;

    static GradientMethod parse_method(const std::string& name);
};

std::string to_string(GradientMethod method);

Eigen::MatrixXd estimate_gradients(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& values,
                                   const GradientOptions& options);

// Active dimension: explicit M, or the split at the largest ratio
// lambda_j / lambda_{j+1} (eigenvalues below 1e-12 lambda_1 count as zero).
struct DimensionRule {
    std::optional<int> dimension;
    static DimensionRule fixed(int M) { return {M}; }
    static DimensionRule largest_gap() { return {}; }
};

struct ActiveSubspace {
    Eigen::MatrixXd W;       // m x m, orthonormal columns
    Eigen::VectorXd lambdas; // descending, non-negative
    int M = 0;

    Eigen::Index dim() const { return W.rows(); }
    Eigen::MatrixXd W1() const { return W.leftCols(M); }
    Eigen::MatrixXd W2() const { return W.rightCols(W.cols() - M); }
};

// (1/N) sum_i g_i g_i^T, accumulated in sample order.
Eigen::MatrixXd gradient_covariance(const Eigen::MatrixXd& gradients);

// Symmetric eigendecomposition with descending eigenvalues, negatives
// clipped to zero and each eigenvector's first nonzero entry made positive.
ActiveSubspace decompose_covariance(const Eigen::MatrixXd& covariance, DimensionRule rule);

ActiveSubspace estimate_active_subspace(const GradientSampleSet& samples, DimensionRule rule);

Eigen::VectorXd project_active(const ActiveSubspace& as, const Eigen::VectorXd& mu);
Eigen::VectorXd project_inactive(const ActiveSubspace& as, const Eigen::VectorXd& mu);
// W1 mu_M + W2 eta; eta defaults to zero.
Eigen::VectorXd lift_to_full(const ActiveSubspace& as, const Eigen::VectorXd& mu_active,
                             const std::optional<Eigen::VectorXd>& eta = std::nullopt);

struct SharedSubspace {
    Eigen::MatrixXd Q; // m x M
    std::vector<ActiveSubspace> sources;
    double residual = 0.0;  // max_i |W1_i^T Q - I|_max
    double condition = 1.0; // of the stacked Gram system
};

// Q = [W1_1 ... W1_k] B with W1_i^T Q = I for every source. Throws
// NoSharedSubspaceError when the least-squares residual exceeds 1e-8.
SharedSubspace compute_shared_subspace(std::span<const ActiveSubspace> sources);

// |A A^T - B B^T|_2 for orthonormal bases of equal dimension.
double subspace_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// CSV with header x1..xm,g1..gm,f.
void write_samples_csv(std::ostream& out, const GradientSampleSet& samples);
GradientSampleSet read_samples_csv(std::istream& in, const std::string& source = "<samples>");
GradientSampleSet load_samples(const std::filesystem::path& path);
void save_samples(const GradientSampleSet& samples, const std::filesystem::path& path);

nlohmann::json to_json(const ActiveSubspace& as);
ActiveSubspace active_subspace_from_json(const nlohmann::json& doc, const std::string& source = "<as>");
nlohmann::json to_json(const SharedSubspace& shared);
SharedSubspace shared_subspace_from_json(const nlohmann::json& doc,
                                         const std::string& source = "<shared>");

} // namespace rh::subspaces
