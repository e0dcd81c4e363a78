#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pupilkit::scaling {

/// Questionnaire emotions in canonical column order.
inline constexpr std::array<std::string_view, 12> kEmotionNames = {
    "positive", "negative", "happy",     "calm", "content", "amused",
    "excited",  "angry",    "sad",       "disgusted", "fearful", "bored"};

/// participants x clips x 12 integer scores in [0, 9]; NaN marks a missing
/// rating.
struct RatingTensor {
    std::vector<std::string> participant_ids;
    std::vector<std::string> clip_ids;
    std::vector<MatrixXd> scores;  // one clips x 12 matrix per participant

    std::size_t n_participants() const { return participant_ids.size(); }
    std::size_t n_clips() const { return clip_ids.size(); }
};

/// Per-participant clip-by-clip Euclidean distances over the 12 rating
/// dimensions. Any missing rating raises missing-data.
std::vector<MatrixXd> dissimilarities(const RatingTensor& ratings);

/// Per-clip scores used to orient the fitted axes: the arousal axis points
/// toward the clip rated most "excited", the valence axis toward the clip
/// rated most "positive".
struct AxisAnchors {
    VectorXd arousal_score;  // mean excited rating per clip
    VectorXd valence_score;  // mean positive rating per clip
};

AxisAnchors anchors_from_ratings(const RatingTensor& ratings);

struct IndscalOptions {
    int dims = 2;
    int max_iter = 500;
    double tol = 1e-10;
    std::uint64_t seed = 0;
};

/// Shared clip configuration with per-participant axis weights. Coordinates
/// are scaled so each axis peaks at |2|; axes are ordered by descending
/// total weight (valence first by convention, arousal second).
struct GroupSpace {
    MatrixXd coordinates;         // clips x dims, within [-2, 2]
    MatrixXd participant_weights; // participants x dims, nonnegative
    double loss = 0;
    int iterations = 0;
    bool converged = true;
};

/// Alternating least squares on the double-centered scalar products:
/// minimizes sum_k ||B_k - X W_k X^T||^2 over the shared configuration X
/// and nonnegative diagonal weights W_k. The loss never increases between
/// iterations.
GroupSpace indscal_fit(const std::vector<MatrixXd>& distances, const IndscalOptions& options = {},
                       const std::optional<AxisAnchors>& anchors = std::nullopt);

/// Per-clip (valence, arousal) labels: each axis affinely rescaled so its
/// minimum is -2 and maximum +2.
MatrixXd labels(const GroupSpace& space);

/// Individual labels for one participant: the group axes stretched by the
/// square root of that participant's weights, then rescaled per axis.
MatrixXd participant_labels(const GroupSpace& space, std::size_t participant);

// --- file formats ---

/// `participant_id,clip_id,emotion,score` long format.
RatingTensor load_ratings(const std::string& path);
void save_ratings(const RatingTensor& ratings, const std::string& path, const io::FileHeader& meta);

/// `clip_id,valence,arousal`; also the import format for external labels.
struct LabelTable {
    std::vector<std::string> clip_ids;
    MatrixXd values;  // clips x 2, (valence, arousal)
};

LabelTable load_labels(const std::string& path);
void save_labels(const LabelTable& table, const std::string& path, const io::FileHeader& meta);

}  // namespace pupilkit::scaling
