#include <gtest/gtest.h>

#include <httplib.h>

#include <future>

#include "poke2vid/data/dataset.hpp"
#include "poke2vid/service/encoding.hpp"
#include "poke2vid/service/server.hpp"
#include "poke2vid/service/worker_pool.hpp"
#include "support.hpp"

using namespace poke2vid;
namespace pt = poke2vid::testing;
using json = nlohmann::json;

namespace {

std::shared_ptr<VideoModel> tiny_model() {
    torch::manual_seed(0);
    ModelConfig cfg;
    cfg.codec = CodecConfig{16, 8, 4, 0};
    Poke2VidModel model(cfg);
    model->eval();
    return std::make_shared<Poke2VidVideoModel>(model, "tiny");
}

std::string png_b64(const Frame& f) { return base64_encode(encode_png(f)); }

json poke_body(const Frame& image) {
    return json{{"image", png_b64(image)}, {"location", {4, 5}}, {"displacement", {2.0, -1.0}}, {"num_frames", 3}};
}

}  // namespace

TEST(Base64, RoundTripAndDataUrl) {
    const std::vector<unsigned char> bytes{0, 1, 2, 250, 255, 17, 42};
    const auto text = base64_encode(bytes);
    EXPECT_EQ(base64_decode(text), bytes);
    EXPECT_EQ(base64_decode("data:image/png;base64," + text), bytes);
    EXPECT_EQ(base64_encode({'M', 'a', 'n'}), "TWFu");
    EXPECT_THROW(base64_decode("@@@"), ValidationError);
}

TEST(Apng, SignatureAndFrameCount) {
    VideoClip clip{torch::rand({3, 3, 16, 16}), 10.0, "c", Split::kTest};
    const auto png = encode_apng(clip);
    ASSERT_GT(png.size(), 8u);
    EXPECT_EQ(png[1], 'P');
    const std::string text(png.begin(), png.end());
    EXPECT_NE(text.find("acTL"), std::string::npos);
    std::size_t fctl = 0;
    for (auto pos = text.find("fcTL"); pos != std::string::npos; pos = text.find("fcTL", pos + 1)) ++fctl;
    EXPECT_EQ(fctl, 3u);
    // The first frame doubles as the default image.
    EXPECT_TRUE(torch::equal(decode_png(png), decode_png(encode_png(clip.frame(0)))));
}

TEST(Letterbox, WideImageIsPaddedVertically) {
    const auto box = letterbox_for(32, 64, 16);
    EXPECT_DOUBLE_EQ(box.scale, 0.25);
    EXPECT_EQ(box.pad_top, 4);
    EXPECT_EQ(box.pad_left, 0);
    const auto out = apply_letterbox(torch::ones({3, 32, 64}), box);
    EXPECT_EQ(out.sizes(), (std::vector<std::int64_t>{3, 16, 16}));
    EXPECT_EQ(out.slice(1, 0, 4).abs().max().item<float>(), 0.f);
    EXPECT_NEAR(out.slice(1, 4, 12).min().item<float>(), 1.f, 1e-6);
}

TEST(WorkerPool, RefusesBeyondCapacity) {
    BoundedWorkerPool pool(1, 1);
    std::promise<void> gate;
    auto release = gate.get_future().share();
    auto a = pool.submit([release] { release.wait(); return 1; });
    auto b = pool.submit([release] { release.wait(); return 2; });
    ASSERT_TRUE(a && b);
    EXPECT_FALSE(pool.submit([] { return 3; }).has_value());
    gate.set_value();
    EXPECT_EQ(a->get() + b->get(), 3);
    auto c = pool.submit([] { return 4; });
    ASSERT_TRUE(c);
    EXPECT_EQ(c->get(), 4);
}

TEST(PokeServiceTest, HealthLifecycle) {
    PokeService svc(ServiceConfig{});
    EXPECT_EQ(svc.health().body.at("status"), "loading");
    EXPECT_EQ(svc.poke("{}").status, 503);
    svc.set_model(tiny_model());
    EXPECT_EQ(svc.health().body.at("status"), "ready");
    EXPECT_EQ(svc.health().body.at("model_id"), "tiny");
    EXPECT_TRUE(pt::schema_errors("Health", svc.health().body).empty());
}

TEST(PokeServiceTest, RoundTripPreservesDimensions) {
    PokeService svc(ServiceConfig{});
    svc.set_model(tiny_model());
    const auto res = svc.poke(poke_body(torch::rand({3, 16, 16})).dump());
    ASSERT_EQ(res.status, 200) << res.body.dump();
    EXPECT_TRUE(pt::schema_errors("PokeResponse", res.body).empty());
    ASSERT_EQ(res.body.at("frames").size(), 3u);
    for (const auto& f : res.body.at("frames")) {
        const auto frame = decode_png(base64_decode(f.get<std::string>()));
        EXPECT_EQ(frame.sizes(), (std::vector<std::int64_t>{3, 16, 16}));
    }
}

TEST(PokeServiceTest, ValidationFailures) {
    ServiceConfig cfg;
    cfg.max_frames = 25;
    PokeService svc(cfg);
    svc.set_model(tiny_model());
    const auto image = torch::rand({3, 16, 16});
    auto expect_400 = [&](json body) {
        const auto res = svc.poke(body.dump());
        EXPECT_EQ(res.status, 400) << body.dump().substr(0, 200);
        EXPECT_EQ(res.body.value("error", ""), "validation");
        EXPECT_TRUE(pt::schema_errors("Error", res.body).empty());
    };
    auto body = poke_body(image);
    body["num_frames"] = 26;
    expect_400(body);
    body["num_frames"] = 0;
    expect_400(body);
    body = poke_body(image);
    body["location"] = {16, 0};
    expect_400(body);
    body = poke_body(image);
    body["image_id"] = "x";
    expect_400(body);
    body = poke_body(image);
    body.erase("image");
    expect_400(body);
    body = poke_body(image);
    body["mode"] = "drag";
    expect_400(body);
    body = poke_body(image);
    body["mode"] = "impulse";
    expect_400(body);
    body = poke_body(image);
    body["image"] = "bm90IGEgcG5n";
    expect_400(body);
    EXPECT_EQ(svc.poke("{not json").status, 400);
}

TEST(PokeServiceTest, LetterboxedCoordinates) {
    PokeService svc(ServiceConfig{});
    svc.set_model(tiny_model());
    json body{{"image", png_b64(torch::rand({3, 32, 64}))}, {"location", {31, 63}}, {"displacement", {4.0, 4.0}}};
    const auto job = svc.parse_request(body, 16);
    EXPECT_EQ(job.box.pad_top, 4);
    EXPECT_EQ(job.poke.row, 4 + 7);
    EXPECT_EQ(job.poke.col, 15);
    EXPECT_DOUBLE_EQ(job.poke.dy, 1.0);
    EXPECT_EQ(job.frames, 10);
}

TEST(PokeServiceTest, GalleryAndApng) {
    PokeService svc(ServiceConfig{});
    svc.set_model(tiny_model());
    svc.add_gallery_image("plant", torch::rand({3, 16, 16}));
    const auto g = svc.gallery();
    EXPECT_TRUE(pt::schema_errors("Gallery", g.body).empty());
    ASSERT_EQ(g.body.size(), 1u);
    json body{{"image_id", "plant"}, {"location", {1, 1}}, {"displacement", {0.5, 0.5}}, {"format", "apng"},
              {"num_frames", 2}};
    const auto res = svc.poke(body.dump());
    ASSERT_EQ(res.status, 200);
    EXPECT_TRUE(res.body.contains("apng"));
}

TEST(PokeServiceTest, SynthesisFailureCarriesAnIncidentId) {
    PokeService svc(ServiceConfig{});
    svc.set_model(std::make_shared<pt::FailingModel>());
    const auto res = svc.poke(poke_body(torch::rand({3, 16, 16})).dump());
    EXPECT_EQ(res.status, 500);
    EXPECT_EQ(res.body.at("error"), "synthesis");
    EXPECT_EQ(res.body.at("incident_id").get<std::string>().size(), 16u);
    EXPECT_TRUE(pt::schema_errors("Error", res.body).empty());
}

TEST(PokeServiceTest, HttpEndpoints) {
    ServiceConfig cfg;
    cfg.port = 0;
    PokeService svc(cfg);
    const int port = svc.start();
    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/api/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(json::parse(health->body).at("status"), "loading");
    svc.set_model(tiny_model());
    auto res = client.Post("/api/poke", poke_body(torch::rand({3, 16, 16})).dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
    auto gallery = client.Get("/api/gallery");
    ASSERT_TRUE(gallery);
    EXPECT_TRUE(json::parse(gallery->body).is_array());
    svc.stop();
}

TEST(PokeServiceTest, SchemaCatchesViolations) {
    EXPECT_FALSE(pt::schema_errors("Health", json{{"status", "sleeping"}, {"model_id", ""}}).empty());
    EXPECT_FALSE(pt::schema_errors("Health", json{{"status", "ready"}}).empty());
    EXPECT_FALSE(pt::schema_errors("Error", json{{"error", "validation"}, {"reason", 3}}).empty());
}
