#include "tma/text_encoder.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace tma;

TEST(MockEncoder, Deterministic) {
    MockEncoder enc(32, 7);
    EXPECT_EQ(enc.encode("who held office"), enc.encode("who held office"));
    EXPECT_EQ(MockEncoder(32, 7).encode("who held office"), enc.encode("who held office"));
}

TEST(MockEncoder, UnitRowsAndShape) {
    MockEncoder enc(16, 1);
    const auto m = enc.encode("who was chair of office03 in 2004");
    EXPECT_EQ(m.tokens.size(), 7u);
    EXPECT_EQ(m.vectors.rows(), 8);
    EXPECT_EQ(m.dim(), 16);
    for (Eigen::Index r = 0; r < m.vectors.rows(); ++r) EXPECT_NEAR(m.vectors.row(r).norm(), 1.0, 1e-12);
    EXPECT_EQ(m.content().rows(), 7);
}

TEST(MockEncoder, PositionChangesTokenRow) {
    MockEncoder enc(16, 1);
    const auto m = enc.encode("x x");
    EXPECT_GT((m.vectors.row(1) - m.vectors.row(2)).norm(), 1e-6);
}

TEST(MockEncoder, SeedChangesVectors) {
    EXPECT_FALSE(MockEncoder(16, 1).encode("abc") == MockEncoder(16, 2).encode("abc"));
}

TEST(MockEncoder, EmptyTextIsInputError) {
    MockEncoder enc(8);
    EXPECT_THROW(enc.encode(""), InputError);
    EXPECT_THROW(enc.encode("   "), InputError);
}

TEST(MockEncoder, BatchEqualsLoop) {
    MockEncoder enc(8, 3);
    const std::vector<std::string> texts{"a b", "who was first", "c"};
    const auto batch = enc.encode_batch(texts);
    ASSERT_EQ(batch.size(), 3u);
    for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(batch[i], enc.encode(texts[i]));
    EXPECT_EQ(enc.encode_batch({"one"}).front(), enc.encode("one"));
    EXPECT_TRUE(enc.encode_batch({}).empty());
}

TEST(MockEncoder, BatchErrorCarriesIndex) {
    MockEncoder enc(8);
    try {
        enc.encode_batch({"ok", "fine", ""});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("element 2"), std::string::npos);
    }
}

TEST(EncoderFactory, Backends) {
    EncoderConfig cfg;
    EXPECT_EQ(make_encoder(cfg)->backend_name(), "mock");
    cfg.backend = "pretrained";
    cfg.dim = 768;
    EXPECT_EQ(make_encoder(cfg)->dim(), 768);
    cfg.backend = "nope";
    EXPECT_THROW(make_encoder(cfg), ConfigError);
    cfg.backend = "mock";
    cfg.fine_tune = true;
    EXPECT_THROW(make_encoder(cfg), ConfigError);
}

namespace {

/// Local stand-in for the encoding service: every token becomes a row of
/// its length, the summary row is all ones.
class StubServer {
public:
    explicit StubServer(std::size_t width, int status = 200) {
        server_.Post("/encode", [width, status](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            nlohmann::json results = nlohmann::json::array();
            for (const auto& t : body.at("texts")) {
                const auto tokens = split_whitespace(t.get<std::string>());
                nlohmann::json rows = nlohmann::json::array();
                rows.push_back(std::vector<double>(width, 1.0));
                for (const auto& tok : tokens) rows.push_back(std::vector<double>(width, double(tok.size())));
                results.push_back({{"tokens", tokens}, {"vectors", rows}});
            }
            res.status = status;
            res.set_content(nlohmann::json{{"results", results}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(PretrainedEncoder, ParsesServiceResponse) {
    StubServer server(768);
    PretrainedEncoder enc({server.endpoint(), "stub", 768, 5});
    const auto m = enc.encode("who was president");
    EXPECT_EQ(m.dim(), 768);
    EXPECT_EQ(m.tokens, (std::vector<std::string>{"who", "was", "president"}));
    EXPECT_EQ(m.vectors(0, 0), 1.0);
    EXPECT_EQ(m.vectors(3, 767), 9.0);
    const auto batch = enc.encode_batch({"a", "bb cc"});
    ASSERT_EQ(batch.size(), 2u);
    EXPECT_EQ(batch[1], enc.encode("bb cc"));
}

TEST(PretrainedEncoder, WidthMismatchIsBackendError) {
    StubServer server(10);
    PretrainedEncoder enc({server.endpoint(), "stub", 768, 5});
    EXPECT_THROW(enc.encode("x"), BackendError);
}

TEST(PretrainedEncoder, HttpFailureIsBackendError) {
    StubServer server(768, 500);
    PretrainedEncoder enc({server.endpoint(), "stub", 768, 5});
    EXPECT_THROW(enc.encode("x"), BackendError);
}

TEST(PretrainedEncoder, UnavailableIsBackendErrorNotInputError) {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    PretrainedEncoder enc({"http://127.0.0.1:" + std::to_string(port), "stub", 768, 1});
    EXPECT_THROW(enc.encode("hello"), BackendError);
    EXPECT_THROW(enc.encode(""), InputError);
}
