#pragma once

// Contextual text encoders. Every encoder returns one row per content token
// plus a leading summary row; separator-role tokens never appear as rows.

#include "tma/errors.hpp"
#include "tma/tensor.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace tma {

/// Row 0 is the summary vector, rows 1..n the content tokens.
struct TokenMatrix {
    Matrix vectors;
    std::vector<std::string> tokens;

    Eigen::Index dim() const noexcept { return vectors.cols(); }
    std::size_t token_count() const noexcept { return tokens.size(); }
    Vector summary() const { return vectors.row(0).transpose(); }
    /// Content rows without the summary row.
    Matrix content() const { return vectors.bottomRows(vectors.rows() - 1); }

    bool operator==(const TokenMatrix& o) const {
        return tokens == o.tokens && vectors.rows() == o.vectors.rows() && vectors.cols() == o.vectors.cols() &&
               vectors == o.vectors;
    }
};

class TextEncoder {
public:
    virtual ~TextEncoder() = default;

    /// Throws InputError for empty text and BackendError when the backend fails.
    virtual TokenMatrix encode(const std::string& text) const = 0;

    /// Elementwise equal to encode(); the first failing element is reported
    /// with its index.
    virtual std::vector<TokenMatrix> encode_batch(const std::vector<std::string>& texts) const {
        std::vector<TokenMatrix> out;
        out.reserve(texts.size());
        for (std::size_t i = 0; i < texts.size(); ++i) {
            try {
                out.push_back(encode(texts[i]));
            } catch (const InputError& e) {
                throw InputError("batch element " + std::to_string(i) + ": " + e.what());
            } catch (const BackendError& e) {
                throw BackendError("batch element " + std::to_string(i) + ": " + e.what());
            }
        }
        return out;
    }

    virtual Eigen::Index dim() const = 0;
    virtual std::string backend_name() const = 0;
};

inline std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Deterministic stand-in for a pretrained encoder.
///
/// A token at position p maps to normalize(h(token) + w * e(p mod 2)), where
/// h hashes the token (FNV-1a, then a splitmix64 stream) to a unit vector and
/// e(0), e(1) are two fixed unit vectors; both depend only on the seed. The
/// summary row is the normalized mean of the token rows. Every row has unit
/// L2 norm, and nothing depends on the standard library's distributions, so
/// outputs are stable across platforms.
class MockEncoder final : public TextEncoder {
public:
    explicit MockEncoder(Eigen::Index dim = 64, std::uint64_t seed = 0, double position_weight = 0.1)
        : dim_(dim), seed_(seed), position_weight_(position_weight) {
        if (dim <= 0) throw ConfigError("mock encoder dimension must be positive");
        parity_[0] = hashed_unit("\x01parity-even");
        parity_[1] = hashed_unit("\x01parity-odd");
    }

    TokenMatrix encode(const std::string& text) const override {
        auto tokens = split_whitespace(text);
        if (tokens.empty()) throw InputError("cannot encode empty text");
        TokenMatrix out;
        out.vectors.resize(static_cast<Eigen::Index>(tokens.size()) + 1, dim_);
        Vector mean = Vector::Zero(dim_);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            Vector v = hashed_unit(tokens[i]) + position_weight_ * parity_[i % 2];
            v.normalize();
            out.vectors.row(static_cast<Eigen::Index>(i) + 1) = v.transpose();
            mean += v;
        }
        const double norm = mean.norm();
        out.vectors.row(0) = (norm > 0 ? Vector(mean / norm) : parity_[0]).transpose();
        out.tokens = std::move(tokens);
        return out;
    }

    Eigen::Index dim() const override { return dim_; }
    std::string backend_name() const override { return "mock"; }

private:
    static std::uint64_t splitmix64(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    Vector hashed_unit(std::string_view token) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : token) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        std::uint64_t state = h ^ (seed_ * 0xd1b54a32d192ed03ULL);
        Vector v(dim_);
        for (Eigen::Index k = 0; k < dim_; ++k) {
            v[k] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
        }
        v.normalize();
        return v;
    }

    Eigen::Index dim_;
    std::uint64_t seed_;
    double position_weight_;
    Vector parity_[2];
};

struct PretrainedEncoderOptions {
    /// Base URL of an encoding service, e.g. "http://127.0.0.1:8765".
    std::string endpoint = "http://127.0.0.1:8765";
    std::string model = "bert-base-uncased";
    Eigen::Index dim = 768;
    int timeout_seconds = 30;
};

/// Adapter over an external contextual encoder reached over HTTP.
///
/// Request:  POST {endpoint}/encode  {"model": str, "texts": [str, ...]}
/// Response: {"results": [{"tokens": [str, ...], "vectors": [[float, ...], ...]}, ...]}
/// where each "vectors" holds the summary row first and one row per token,
/// with separator tokens already removed.
class PretrainedEncoder final : public TextEncoder {
public:
    explicit PretrainedEncoder(PretrainedEncoderOptions options) : options_(std::move(options)) {}

    TokenMatrix encode(const std::string& text) const override {
        if (split_whitespace(text).empty()) throw InputError("cannot encode empty text");
        return request({text}).front();
    }

    std::vector<TokenMatrix> encode_batch(const std::vector<std::string>& texts) const override {
        if (texts.empty()) return {};
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (split_whitespace(texts[i]).empty()) {
                throw InputError("batch element " + std::to_string(i) + ": cannot encode empty text");
            }
        }
        return request(texts);
    }

    Eigen::Index dim() const override { return options_.dim; }
    std::string backend_name() const override { return "pretrained"; }

private:
    std::vector<TokenMatrix> request(const std::vector<std::string>& texts) const {
        httplib::Client client(options_.endpoint);
        client.set_connection_timeout(options_.timeout_seconds, 0);
        client.set_read_timeout(options_.timeout_seconds, 0);
        const nlohmann::json body = {{"model", options_.model}, {"texts", texts}};
        auto res = client.Post("/encode", body.dump(), "application/json");
        if (!res) {
            throw BackendError("encoder backend at " + options_.endpoint + " unavailable: " +
                               httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw BackendError("encoder backend returned HTTP " + std::to_string(res->status));
        }
        std::vector<TokenMatrix> out;
        try {
            const auto reply = nlohmann::json::parse(res->body);
            const auto& results = reply.at("results");
            if (results.size() != texts.size()) throw BackendError("encoder backend returned wrong result count");
            for (std::size_t i = 0; i < results.size(); ++i) {
                out.push_back(parse_result(results[i], i));
            }
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed encoder response: ") + e.what());
        }
        return out;
    }

    TokenMatrix parse_result(const nlohmann::json& r, std::size_t index) const {
        TokenMatrix m;
        m.tokens = r.at("tokens").get<std::vector<std::string>>();
        const auto& rows = r.at("vectors");
        if (rows.size() != m.tokens.size() + 1) {
            throw BackendError("result " + std::to_string(index) + ": expected token count + 1 rows");
        }
        m.vectors.resize(static_cast<Eigen::Index>(rows.size()), options_.dim);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<Eigen::Index>(rows[i].size()) != options_.dim) {
                throw BackendError("result " + std::to_string(index) + ": width " + std::to_string(rows[i].size()) +
                                   " != " + std::to_string(options_.dim));
            }
            for (Eigen::Index k = 0; k < options_.dim; ++k) {
                const double v = rows[i][static_cast<std::size_t>(k)].get<double>();
                if (!std::isfinite(v)) throw BackendError("result " + std::to_string(index) + ": non-finite entry");
                m.vectors(static_cast<Eigen::Index>(i), k) = v;
            }
        }
        return m;
    }

    PretrainedEncoderOptions options_;
};

struct EncoderConfig {
    std::string backend = "mock";
    std::string model = "bert-base-uncased";
    std::string endpoint = "http://127.0.0.1:8765";
    Eigen::Index dim = 64;
    std::uint64_t seed = 0;
    /// No shipped backend exposes trainable weights, so this must stay false.
    bool fine_tune = false;
};

inline std::unique_ptr<TextEncoder> make_encoder(const EncoderConfig& config) {
    if (config.fine_tune) {
        throw ConfigError("encoder backend '" + config.backend + "' does not support fine-tuning");
    }
    if (config.backend == "mock") return std::make_unique<MockEncoder>(config.dim, config.seed);
    if (config.backend == "pretrained") {
        PretrainedEncoderOptions opts;
        opts.endpoint = config.endpoint;
        opts.model = config.model;
        opts.dim = config.dim;
        return std::make_unique<PretrainedEncoder>(opts);
    }
    throw ConfigError("unknown encoder backend '" + config.backend + "' (expected \"pretrained\" or \"mock\")");
}

}  // namespace tma
