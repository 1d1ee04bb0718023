#include <doctest.h>

#include <algorithm>
#include <array>
#include <random>

#include <nlohmann/json.hpp>

#include "etfb/contact.hpp"
#include "etfb/errors.hpp"

using namespace etfb;

namespace {

const AxisAlignedBox kCube{{0.0, 0.0, 0.0}, {0.075, 0.075, 0.075}};

Scene cube_scene() { return {SceneObject::box("cube", kCube.center, kCube.half_extents)}; }

// Reference god-object step, written without the production helpers: find
// the boundary crossing by bisection, pick the face whose plane the crossing
// lies on, and drop the tracked point onto that plane.
struct OracleResult {
    Vec3 proxy;
    int face = -1;
    bool ambiguous = false;
};

bool inside(const Vec3& p) {
    for (int a = 0; a < 3; ++a)
        if (std::abs(p[a] - kCube.center[a]) >= kCube.half_extents[a]) return false;
    return true;
}

OracleResult oracle(const Vec3& outside, const Vec3& in) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (inside(outside + mid * (in - outside)) ? hi : lo) = mid;
    }
    const Vec3 c = outside + hi * (in - outside);
    std::array<std::pair<double, int>, 6> gaps{};
    for (int f = 0; f < 6; ++f) {
        const int axis = f / 2;
        const double plane = kCube.center[axis] + (f % 2 ? 1.0 : -1.0) * kCube.half_extents[axis];
        gaps[f] = {std::abs(c[axis] - plane), f};
    }
    std::sort(gaps.begin(), gaps.end());
    OracleResult r;
    r.face = gaps[0].second;
    r.ambiguous = gaps[1].first < 1e-6;
    const int axis = r.face / 2;
    r.proxy = in;
    r.proxy[axis] = kCube.center[axis] + (r.face % 2 ? 1.0 : -1.0) * kCube.half_extents[axis];
    return r;
}

}  // namespace

TEST_CASE("free space: avatar follows the fingertip") {
    const auto scene = cube_scene();
    const Vec3 p{0.2, 0.3, -0.1};
    const auto s = resolve_proxy(FingertipState::free_at({0.2, 0.4, -0.1}), p, scene);
    CHECK_FALSE(s.in_contact);
    CHECK(s.avatar_pos == p);
    CHECK(interpenetration(s, 0.5).d == 0.0);
    CHECK(interpenetration(s, 0.5).d_hat == 0.0);
}

TEST_CASE("pressing through the top face keeps the avatar on the surface") {
    const auto scene = cube_scene();
    auto s = FingertipState::free_at({0.01, 0.1, 0.02});
    s = resolve_proxy(s, {0.01, 0.065, 0.02}, scene);
    REQUIRE(s.in_contact);
    CHECK(s.contact_object == std::optional<std::string>("cube"));
    CHECK(s.contact_face == std::optional<BoxFace>(BoxFace::PosY));
    CHECK(s.avatar_pos.x == doctest::Approx(0.01));
    CHECK(s.avatar_pos.y == doctest::Approx(0.075));
    CHECK(s.avatar_pos.z == doctest::Approx(0.02));
    const auto sample = interpenetration(s, 1.0);
    CHECK(sample.d == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(sample.d_hat == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("the entry face sticks even when another face becomes nearer") {
    const auto scene = cube_scene();
    auto s = FingertipState::free_at({0.07, 0.1, 0.0});
    s = resolve_proxy(s, {0.07, 0.07, 0.0}, scene);
    REQUIRE(s.contact_face == std::optional<BoxFace>(BoxFace::PosY));
    // Deeper than the distance to +x: the nearest face is now +x, the proxy stays on top.
    s = resolve_proxy(s, {0.07, 0.05, 0.0}, scene);
    CHECK(s.contact_face == std::optional<BoxFace>(BoxFace::PosY));
    CHECK(s.avatar_pos.y == doctest::Approx(0.075));
    CHECK(interpenetration(s, 0).d == doctest::Approx(0.025));
}

TEST_CASE("leaving the volume releases contact") {
    const auto scene = cube_scene();
    auto s = FingertipState::free_at({0.0, 0.1, 0.0});
    s = resolve_proxy(s, {0.0, 0.06, 0.0}, scene);
    REQUIRE(s.in_contact);
    s = resolve_proxy(s, {0.0, 0.08, 0.0}, scene);
    CHECK_FALSE(s.in_contact);
    CHECK(s.avatar_pos == Vec3{0.0, 0.08, 0.0});
}

TEST_CASE("d_hat saturates at 3 cm") {
    CHECK(normalize_depth(0.0) == 0.0);
    CHECK(normalize_depth(0.015) == doctest::Approx(0.5));
    CHECK(normalize_depth(0.03) == 1.0);
    CHECK(normalize_depth(0.05) == 1.0);
    CHECK(normalize_depth(-1.0) == 0.0);
}

TEST_CASE("half-space contact projects onto the plane") {
    const Scene scene{SceneObject::half_space("floor", {0.0, 0.0, 0.0}, {0.0, 1.0, 0.0})};
    auto s = resolve_proxy(FingertipState::free_at({0.1, 0.05, 0.2}), {0.1, -0.02, 0.2}, scene);
    REQUIRE(s.in_contact);
    CHECK_FALSE(s.contact_face.has_value());
    CHECK(s.avatar_pos.y == doctest::Approx(0.0));
    CHECK(interpenetration(s, 0).d == doctest::Approx(0.02));
}

TEST_CASE("random penetrations agree with the bisection oracle and never leave the proxy inside") {
    const auto scene = cube_scene();
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> in(-0.0749, 0.0749);
    std::uniform_real_distribution<double> out(-0.3, 0.3);
    int checked = 0;
    double worst = 0.0;
    while (checked < 1000) {
        const Vec3 inner{in(rng), in(rng), in(rng)};
        Vec3 outer{out(rng), out(rng), out(rng)};
        if (inside(outer) || norm(outer) < 0.14) continue;
        const auto ref = oracle(outer, inner);
        if (ref.ambiguous) continue;
        const auto s = resolve_proxy(FingertipState::free_at(outer), inner, scene);
        REQUIRE(s.in_contact);
        REQUIRE(s.contact_face.has_value());
        CHECK(static_cast<int>(*s.contact_face) == ref.face);
        worst = std::max(worst, distance(s.avatar_pos, ref.proxy));
        CHECK_FALSE(scene[0].strictly_contains(s.avatar_pos));
        CHECK(std::abs(scene[0].signed_distance(s.avatar_pos)) <= kSurfaceTolerance);
        ++checked;
    }
    CHECK(worst <= 1e-7);
}

TEST_CASE("sliding inside keeps the proxy on the entry plane") {
    const auto scene = cube_scene();
    std::mt19937_64 rng(7);
    std::normal_distribution<double> step(0.0, 0.003);
    auto s = FingertipState::free_at({0.0, 0.2, 0.0});
    Vec3 p{0.0, 0.07, 0.0};
    s = resolve_proxy(s, p, scene);
    for (int i = 0; i < 500 && s.in_contact; ++i) {
        p = p + Vec3{step(rng), step(rng), step(rng)};
        s = resolve_proxy(s, p, scene);
        if (!s.in_contact) break;
        CHECK(s.contact_face == std::optional<BoxFace>(BoxFace::PosY));
        CHECK(s.avatar_pos.y == doctest::Approx(0.075));
        CHECK(interpenetration(s, 0).d == doctest::Approx(0.075 - p.y).epsilon(1e-9));
    }
}

TEST_CASE("entry_face on axis-aligned approaches") {
    CHECK(entry_face(kCube, {0.0, 0.2, 0.0}, {0.0, 0.0, 0.0}) == BoxFace::PosY);
    CHECK(entry_face(kCube, {0.0, -0.2, 0.0}, {0.0, 0.0, 0.0}) == BoxFace::NegY);
    CHECK(entry_face(kCube, {0.3, 0.0, 0.0}, {0.0, 0.0, 0.0}) == BoxFace::PosX);
    CHECK(entry_face(kCube, {0.0, 0.0, -0.3}, {0.0, 0.0, 0.0}) == BoxFace::NegZ);
    CHECK(nearest_face(kCube, {0.07, 0.0, 0.0}) == BoxFace::PosX);
    CHECK(project_onto_face(kCube, BoxFace::PosY, {0.5, 0.0, 0.0}) == Vec3{0.075, 0.075, 0.0});
}

TEST_CASE("non-finite positions are rejected") {
    const auto scene = cube_scene();
    CHECK_THROWS_AS(resolve_proxy(FingertipState::free_at({}), {std::nan(""), 0, 0}, scene), ContractViolation);
}

TEST_CASE("scene validation") {
    CHECK_THROWS_AS(SceneObject::box("b", {}, {0.0, 1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(SceneObject::half_space("h", {}, {0.0, 2.0, 0.0}), ConfigError);

    const auto doc = nlohmann::json::parse(R"({"objects":[
        {"id":"cube","type":"box","center":[0,0.1,0],"half_extents":[0.1,0.1,0.1]},
        {"id":"table","type":"box","center":[0,-0.025,0],"half_extents":[1,0.025,1]}]})");
    const auto scene = scene_from_json(doc);
    CHECK(scene.size() == 2);
    CHECK(scene_from_json(scene_to_json(scene)).size() == 2);

    auto dup = doc;
    dup["objects"][1]["id"] = "cube";
    CHECK_THROWS_AS(scene_from_json(dup), ConfigError);

    auto overlap = doc;
    overlap["objects"][1]["center"] = nlohmann::json::array({0, 0.0, 0});
    CHECK_THROWS_AS(scene_from_json(overlap), ConfigError);

    auto unknown = doc;
    unknown["objects"][0]["type"] = "sphere";
    CHECK_THROWS_AS(scene_from_json(unknown), ConfigError);
}

TEST_CASE("signed distance signs") {
    const auto obj = SceneObject::box("b", kCube.center, kCube.half_extents);
    CHECK(obj.signed_distance({0, 0, 0}) == doctest::Approx(-0.075));
    CHECK(obj.signed_distance({0, 0.1, 0}) == doctest::Approx(0.025));
    CHECK(obj.signed_distance({0, 0.075, 0}) == doctest::Approx(0.0));
    CHECK_FALSE(obj.strictly_contains({0, 0.075, 0}));
    CHECK(obj.strictly_contains({0, 0.0749, 0}));
}
