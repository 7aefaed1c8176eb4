#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "echo_server.hpp"
#include "fixtures.hpp"
#include "gsedit/errors.hpp"
#include "gsedit/guidance.hpp"
#include "gsedit/protocol.hpp"
#include "gsedit/rasterizer.hpp"

using namespace gsedit;

namespace {

ImageBuffer random_image(std::mt19937_64& rng, int w, int h, int c = 3) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  ImageBuffer img(w, h, c);
  for (auto& v : img.data) v = u(rng);
  return img;
}

GuidanceResponse constant_response(int w, int h, float v) {
  GuidanceResponse r;
  r.residual = ImageBuffer(w, h, 3, v);
  return r;
}

}  // namespace

TEST(Sds, ZeroResidualGivesZeroGradient) {
  const auto g = sds_gradient(constant_response(4, 4, 0.0f), NoiseSchedule{}, 500);
  for (float v : g.data) EXPECT_EQ(v, 0.0f);
}

TEST(Sds, ConstantResidualPassesThroughUnitWeight) {
  const auto g = sds_gradient(constant_response(4, 4, 0.2f), NoiseSchedule{}, 500);
  for (float v : g.data) EXPECT_FLOAT_EQ(v, 0.2f);
}

TEST(Sds, ZeroWeightSilencesResidual) {
  NoiseSchedule s;
  s.weight = [](int) { return 0.0; };
  const auto g = sds_gradient(constant_response(4, 4, 0.7f), s, 100);
  for (float v : g.data) EXPECT_EQ(v, 0.0f);
}

TEST(Sds, GradientIsLinearAndHomogeneous) {
  std::mt19937_64 rng(1);
  GuidanceResponse a, b, sum;
  a.residual = random_image(rng, 6, 5);
  b.residual = random_image(rng, 6, 5);
  sum.residual = a.residual;
  for (std::size_t i = 0; i < sum.residual.data.size(); ++i) sum.residual.data[i] += b.residual.data[i];
  NoiseSchedule s;
  s.weight = [](int t) { return 0.5 + t / 1000.0; };
  const auto ga = sds_gradient(a, s, 300), gb = sds_gradient(b, s, 300), gs = sds_gradient(sum, s, 300);
  for (std::size_t i = 0; i < gs.data.size(); ++i) EXPECT_NEAR(gs.data[i], ga.data[i] + gb.data[i], 1e-5);
  NoiseSchedule s2 = s;
  s2.weight = [](int t) { return 3.0 * (0.5 + t / 1000.0); };
  const auto g3 = sds_gradient(a, s2, 300);
  for (std::size_t i = 0; i < g3.data.size(); ++i) EXPECT_NEAR(g3.data[i], 3.0f * ga.data[i], 1e-5);
}

TEST(Sds, TimestepOutsideScheduleIsRejected) {
  EXPECT_THROW(sds_gradient(constant_response(2, 2, 0.0f), NoiseSchedule{}, 5), ContractViolation);
}

TEST(SdsLoss, ZeroAndConstantResiduals) {
  EXPECT_EQ(sds_loss_value(constant_response(3, 3, 0.0f), NoiseSchedule{}, 100), 0.0);
  NoiseSchedule s;
  s.weight = [](int) { return 2.5; };
  EXPECT_NEAR(sds_loss_value(constant_response(3, 3, 0.4f), s, 100), 2.5 * 0.4f * 0.4f, 1e-9);
}

TEST(SdsLoss, MatchesIndependentMeanSquare) {
  std::mt19937_64 rng(2);
  GuidanceResponse r;
  r.residual = random_image(rng, 9, 7);
  long double acc = 0.0L;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) acc += static_cast<long double>(r.residual.at(x, y, c)) * r.residual.at(x, y, c);
  const double reference = static_cast<double>(acc / (9 * 7 * 3));
  EXPECT_NEAR(sds_loss_value(r, NoiseSchedule{}, 500), reference, 1e-12);
}

TEST(Oracle, EqualImagesGiveZeroResidual) {
  std::mt19937_64 rng(3);
  GuidanceRequest req;
  req.image = random_image(rng, 5, 5);
  const auto resp = oracle_guidance(req, req.image, 3.0);
  for (float v : resp.residual.data) EXPECT_EQ(v, 0.0f);
  ASSERT_TRUE(resp.attention.has_value());
  for (float v : resp.attention->grid.data) EXPECT_EQ(v, 0.0f);
}

TEST(Oracle, ResidualScalesDifference) {
  GuidanceRequest req;
  req.image = ImageBuffer(4, 4, 3, 0.25f);
  ImageBuffer target = req.image;
  target.at(2, 1, 1) = -0.25f;  // image - target = 0.5
  const auto resp = oracle_guidance(req, target, 2.0);
  EXPECT_FLOAT_EQ(resp.residual.at(2, 1, 1), 1.0f);
  EXPECT_EQ(resp.residual.at(0, 0, 1), 0.0f);
  EXPECT_FLOAT_EQ(resp.attention->grid.at(2, 1), 1.0f);
}

TEST(Oracle, DescentOnFlatGaussianColorConverges) {
  // The oracle objective is 0.5 s sum_p |sigma_p c - sigma_p c*|^2, a convex
  // quadratic in c with curvature s sum_p sigma_p^2.
  const Camera cam = test::axis_camera(32, 32, 40.0);
  GaussianScene scene, target_scene;
  scene.gaussians.push_back(test::make_gaussian({0, 0, 4}, 0.3f, 0.8f, {0.9f, 0.1f, 0.2f}));
  target_scene = scene;
  const Eigen::Vector3f goal(0.1f, 0.8f, 0.3f);
  target_scene.gaussians[0].params.color = goal;
  const ImageBuffer target = render(target_scene, cam).image;
  const double strength = 1.0;

  double curvature = 0.0;
  const RenderOutput r0 = render(scene, cam);
  for (const auto& rec : r0.records) curvature += strength * std::pow(rec.sigma * rec.transmittance, 2);
  const double lr = 0.5 / curvature;

  int steps = 0;
  for (; steps < 500; ++steps) {
    const RenderOutput r = render(scene, cam);
    GuidanceRequest req;
    req.image = r.image;
    const auto resp = oracle_guidance(req, target, strength);
    const auto grads = rasterize_backward(r, sds_gradient(resp, NoiseSchedule{}, 500), scene, cam);
    scene.gaussians[0].params.color -= (lr * grads.color[0]).cast<float>();
    if ((scene.gaussians[0].params.color - goal).cwiseAbs().maxCoeff() < 1e-3f) break;
  }
  EXPECT_LT(steps, 500);
  EXPECT_LT((scene.gaussians[0].params.color - goal).cwiseAbs().maxCoeff(), 1e-3f);
}

TEST(Oracle, UpdateDirectionMatchesScaledL2Gradient) {
  // Colors only: the oracle-driven gradient equals rasterize_backward fed with
  // w * s * (I - target).
  std::mt19937_64 rng(4);
  const Camera cam = test::axis_camera(24, 24, 30.0);
  const GaussianScene scene = test::random_scene(rng, 6, 24, 30.0);
  const ImageBuffer target = random_image(rng, 24, 24);
  const RenderOutput r = render(scene, cam);
  GuidanceRequest req;
  req.image = r.image;
  const double strength = 0.7, w = 1.3;
  NoiseSchedule s;
  s.weight = [w](int) { return w; };
  const auto via_oracle = rasterize_backward(r, sds_gradient(oracle_guidance(req, target, strength), s, 200), scene, cam);
  ImageBuffer direct(24, 24, 3);
  for (std::size_t i = 0; i < direct.data.size(); ++i)
    direct.data[i] = static_cast<float>(w * strength * (r.image.data[i] - target.data[i]));
  const auto expected = rasterize_backward(r, direct, scene, cam);
  for (std::size_t i = 0; i < scene.size(); ++i)
    EXPECT_LT((via_oracle.color[i] - expected.color[i]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Wire, GuidanceRequestRoundTrip) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    GuidanceRequest req;
    req.image = random_image(rng, 1 + static_cast<int>(rng() % 9), 1 + static_cast<int>(rng() % 9));
    req.prompt = "a photo of a " + std::string(rng() % 20, 'x') + " \xe2\x9c\x93";
    req.timestep = static_cast<std::uint32_t>(rng() % 1000);
    req.noise_seed = rng();
    const auto back = wire::decode_guidance_request(wire::encode_guidance_request(req));
    ASSERT_EQ(back.prompt, req.prompt);
    ASSERT_EQ(back.timestep, req.timestep);
    ASSERT_EQ(back.noise_seed, req.noise_seed);
    ASSERT_TRUE(back.image.same_shape(req.image));
    ASSERT_EQ(back.image.data, req.image.data);
  }
}

TEST(Wire, GuidanceResponseRoundTrip) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 9), h = 1 + static_cast<int>(rng() % 9);
    GuidanceResponse resp;
    resp.residual = random_image(rng, w, h);
    if (rng() & 1) {
      AttentionMap att;
      att.grid = random_image(rng, w, h, 1);
      resp.attention = att;
    }
    const auto back = wire::decode_guidance_response(wire::encode_guidance_response(resp), w, h);
    ASSERT_EQ(back.residual.data, resp.residual.data);
    ASSERT_EQ(back.attention.has_value(), resp.attention.has_value());
    if (resp.attention) ASSERT_EQ(back.attention->grid.data, resp.attention->grid.data);
  }
}

TEST(Wire, SegmentationRoundTrip) {
  std::mt19937_64 rng(7);
  wire::SegmentationRequest req;
  req.view_id = 3;
  req.keyword = "hat";
  req.image = random_image(rng, 8, 6);
  req.positives = {{1, 2}, {7, 5}};
  req.negatives = {{0, 0}};
  EXPECT_EQ(wire::decode_segmentation_request(wire::encode_segmentation_request(req)), req);
  const ImageBuffer mask = random_image(rng, 8, 6, 1);
  EXPECT_EQ(wire::decode_segmentation_response(wire::encode_segmentation_response(mask), 8, 6).data, mask.data);
}

TEST(Wire, MalformedPayloadsAreTransportErrors) {
  GuidanceRequest req;
  req.image = ImageBuffer(4, 4, 3);
  auto bytes = wire::encode_guidance_request(req);
  bytes.pop_back();
  EXPECT_THROW(wire::decode_guidance_request(bytes), TransportError);
  bytes.push_back(0);
  bytes.push_back(0);
  EXPECT_THROW(wire::decode_guidance_request(bytes), TransportError);
  std::vector<std::uint8_t> header = wire::encode_header({1, wire::MessageType::GuidanceRequest, 0});
  header[0] = 'X';
  EXPECT_THROW(wire::decode_header(header), TransportError);
  GuidanceResponse resp;
  resp.residual = ImageBuffer(4, 4, 3);
  EXPECT_THROW(wire::decode_guidance_response(wire::encode_guidance_response(resp), 5, 4), TransportError);
}

TEST(Remote, EchoServerReturnsSentImage) {
  test::EchoServer server(test::EchoServer::Mode::Echo);
  std::mt19937_64 rng(8);
  GuidanceRequest req;
  req.image = random_image(rng, 16, 12);
  req.prompt = "a green blob";
  const auto resp = remote_guidance(req, {"127.0.0.1", server.port()}, 2000);
  EXPECT_EQ(resp.residual.data, req.image.data);
  EXPECT_FALSE(resp.attention.has_value());
}

TEST(Remote, ByteCountsFollowFrameLayout) {
  test::EchoServer server(test::EchoServer::Mode::Echo);
  GuidanceRequest req;
  req.image = ImageBuffer(64, 64, 3, 0.5f);
  req.prompt = "green";
  TransferStats st;
  remote_guidance(req, {"127.0.0.1", server.port()}, 2000, &st);
  // header 15 = magic 4 + version 2 + type 1 + length 8
  // request payload = w 4 + h 4 + t 4 + seed 8 + prompt length 4 + prompt 5 + 64*64*3*4
  // response payload = 64*64*3*4 + has_attention 1
  EXPECT_EQ(st.bytes_sent, 15u + 29u + 49152u);
  EXPECT_EQ(st.bytes_received, 15u + 49152u + 1u);
  EXPECT_EQ(st.attempts, 1);
}

TEST(Remote, EarlyCloseFailsAfterOneRetry) {
  test::EchoServer server(test::EchoServer::Mode::CloseEarly);
  GuidanceRequest req;
  req.image = ImageBuffer(8, 8, 3);
  TransferStats st;
  EXPECT_THROW(remote_guidance(req, {"127.0.0.1", server.port()}, 2000, &st), TransportError);
  EXPECT_EQ(st.attempts, 2);
}

TEST(Remote, ErrorReplyIsNotRetried) {
  test::EchoServer server(test::EchoServer::Mode::ErrorReply);
  GuidanceRequest req;
  req.image = ImageBuffer(8, 8, 3);
  TransferStats st;
  try {
    remote_guidance(req, {"127.0.0.1", server.port()}, 2000, &st);
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported request"), std::string::npos);
  }
  EXPECT_EQ(st.attempts, 1);
}

TEST(Remote, VersionMismatchIsReported) {
  test::EchoServer server(test::EchoServer::Mode::WrongVersion);
  GuidanceRequest req;
  req.image = ImageBuffer(8, 8, 3);
  EXPECT_THROW(remote_guidance(req, {"127.0.0.1", server.port()}, 2000), TransportError);
}

TEST(Remote, UnreachableEndpointIsTransportError) {
  std::uint16_t port;
  { wire::Listener l; port = l.port(); }
  GuidanceRequest req;
  req.image = ImageBuffer(4, 4, 3);
  EXPECT_THROW(remote_guidance(req, {"127.0.0.1", port}, 500), TransportError);
}

TEST(Endpoint, Parse) {
  const auto e = Endpoint::parse("localhost:7001");
  EXPECT_EQ(e.host, "localhost");
  EXPECT_EQ(e.port, 7001);
  EXPECT_THROW(Endpoint::parse("nohost"), ConfigError);
  EXPECT_THROW(Endpoint::parse("h:99999"), ConfigError);
}
