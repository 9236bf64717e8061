#pragma once

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "abusepipe/io.hpp"

namespace abusepipe {

struct EmbeddingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// n description embeddings, one row per id. Rows must be finite and ids
// unique; embeddings arrive precomputed, no model inference happens here.
struct EmbeddingMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;  // n x d

    std::size_t rows() const { return ids.size(); }

    void validate() const {
        if (static_cast<Eigen::Index>(ids.size()) != values.rows()) {
            throw EmbeddingError("id count does not match row count");
        }
        std::unordered_set<std::string> seen;
        for (const auto& id : ids) {
            if (!seen.insert(id).second) throw EmbeddingError("duplicate id: " + id);
        }
        if (!values.allFinite()) throw EmbeddingError("non-finite embedding value");
    }
};

// Text format, versioned:
//   abusepipe-embeddings v1
//   <n> <d>
//   <id> <v1> ... <vd>
inline constexpr std::string_view kEmbeddingsMagic = "abusepipe-embeddings v1";

inline EmbeddingMatrix embeddings_from_text(std::string_view text) {
    auto lines = split_lines(text);
    if (lines.empty() || trim(lines[0]) != kEmbeddingsMagic) {
        throw EmbeddingError("bad embeddings header (expected 'abusepipe-embeddings v1')");
    }
    if (lines.size() < 2) throw EmbeddingError("missing dimensions line");
    std::istringstream dims(lines[1]);
    std::size_t n = 0, d = 0;
    if (!(dims >> n >> d) || d == 0) throw EmbeddingError("bad dimensions line");
    if (lines.size() < 2 + n) throw EmbeddingError("fewer rows than declared");

    EmbeddingMatrix m;
    m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        std::istringstream row(lines[2 + i]);
        std::string id;
        if (!(row >> id)) throw EmbeddingError("missing id on row " + std::to_string(i));
        m.ids.push_back(id);
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0;
            if (!(row >> v)) throw EmbeddingError("short row " + std::to_string(i));
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    m.validate();
    return m;
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    return embeddings_from_text(read_file(path));
}

inline std::string embeddings_to_text(const EmbeddingMatrix& m) {
    std::ostringstream out;
    out << kEmbeddingsMagic << "\n" << m.rows() << " " << m.values.cols() << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out << m.ids[i];
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            out << " " << m.values(static_cast<Eigen::Index>(i), j);
        }
        out << "\n";
    }
    return out.str();
}

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& m) {
    write_file(path, embeddings_to_text(m));
}

}  // namespace abusepipe
