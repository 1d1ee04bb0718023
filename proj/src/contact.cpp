#include "etfb/contact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/detail/overloaded.hpp"
#include "etfb/errors.hpp"

namespace etfb {
namespace {

using detail::Overloaded;

Vec3 box_min(const AxisAlignedBox& b) { return b.center - b.half_extents; }
Vec3 box_max(const AxisAlignedBox& b) { return b.center + b.half_extents; }

// Touching boxes (shared face up to rounding) do not overlap.
bool boxes_overlap(const AxisAlignedBox& a, const AxisAlignedBox& b) {
    constexpr double kTouchTolerance = 1e-9;
    const Vec3 amin = box_min(a), amax = box_max(a);
    const Vec3 bmin = box_min(b), bmax = box_max(b);
    for (int axis = 0; axis < 3; ++axis) {
        if (amax[axis] <= bmin[axis] + kTouchTolerance || bmax[axis] <= amin[axis] + kTouchTolerance) return false;
    }
    return true;
}

FingertipState constrained(const SceneObject& obj, std::optional<BoxFace> face, const Vec3& real_pos) {
    FingertipState s;
    s.real_pos = real_pos;
    s.in_contact = true;
    s.contact_object = obj.id();
    std::visit(Overloaded{
                   [&](const AxisAlignedBox& box) {
                       s.contact_face = face;
                       s.avatar_pos = project_onto_face(box, *face, real_pos);
                   },
                   [&](const HalfSpace& hs) {
                       const double sd = dot(real_pos - hs.point, hs.outward_normal);
                       s.avatar_pos = real_pos - sd * hs.outward_normal;
                   },
               },
               obj.shape());
    return s;
}

Vec3 vec3_from_json(const nlohmann::json& j, const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 3) throw ConfigError(fmt::format("'{}' must be an array of 3 numbers", key));
    Vec3 v{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
    if (!is_finite(v)) throw ConfigError(fmt::format("'{}' must be finite", key));
    return v;
}

nlohmann::json vec3_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

SceneObject SceneObject::box(std::string id, Vec3 center, Vec3 half_extents) {
    if (!is_finite(center) || !is_finite(half_extents)) throw ConfigError("box '" + id + "': non-finite geometry");
    if (half_extents.x <= 0.0 || half_extents.y <= 0.0 || half_extents.z <= 0.0)
        throw ConfigError("box '" + id + "': half extents must be strictly positive");
    return SceneObject(std::move(id), AxisAlignedBox{center, half_extents});
}

SceneObject SceneObject::half_space(std::string id, Vec3 point, Vec3 outward_normal) {
    if (!is_finite(point) || !is_finite(outward_normal)) throw ConfigError("half space '" + id + "': non-finite geometry");
    if (std::abs(norm(outward_normal) - 1.0) > 1e-9)
        throw ConfigError("half space '" + id + "': outward normal must be unit length");
    return SceneObject(std::move(id), HalfSpace{point, outward_normal});
}

double SceneObject::signed_distance(const Vec3& p) const {
    return std::visit(Overloaded{
                          [&](const AxisAlignedBox& b) {
                              const Vec3 q{std::abs(p.x - b.center.x) - b.half_extents.x,
                                           std::abs(p.y - b.center.y) - b.half_extents.y,
                                           std::abs(p.z - b.center.z) - b.half_extents.z};
                              const Vec3 outside{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
                              return norm(outside) + std::min(std::max({q.x, q.y, q.z}), 0.0);
                          },
                          [&](const HalfSpace& h) { return dot(p - h.point, h.outward_normal); },
                      },
                      shape_);
}

bool SceneObject::strictly_contains(const Vec3& p) const {
    return std::visit(Overloaded{
                          [&](const AxisAlignedBox& b) {
                              const Vec3 lo = box_min(b), hi = box_max(b);
                              return lo.x < p.x && p.x < hi.x && lo.y < p.y && p.y < hi.y && lo.z < p.z && p.z < hi.z;
                          },
                          [&](const HalfSpace& h) { return dot(p - h.point, h.outward_normal) < 0.0; },
                      },
                      shape_);
}

BoxFace entry_face(const AxisAlignedBox& box, const Vec3& outside, const Vec3& inside) {
    const Vec3 lo = box_min(box), hi = box_max(box);
    double best_t = -std::numeric_limits<double>::infinity();
    std::optional<BoxFace> best;
    for (int axis = 0; axis < 3; ++axis) {
        double t;
        int face;
        if (outside[axis] <= lo[axis]) {
            t = (lo[axis] - outside[axis]) / (inside[axis] - outside[axis]);
            face = 2 * axis;
        } else if (outside[axis] >= hi[axis]) {
            t = (outside[axis] - hi[axis]) / (outside[axis] - inside[axis]);
            face = 2 * axis + 1;
        } else {
            continue;
        }
        if (t > best_t) {
            best_t = t;
            best = static_cast<BoxFace>(face);
        }
    }
    // `outside` actually inside: no slab crossing to report.
    return best ? *best : nearest_face(box, inside);
}

BoxFace nearest_face(const AxisAlignedBox& box, const Vec3& inside) {
    const Vec3 lo = box_min(box), hi = box_max(box);
    int best = 0;
    double best_depth = std::numeric_limits<double>::infinity();
    for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const double depth = (face % 2 == 0) ? inside[axis] - lo[axis] : hi[axis] - inside[axis];
        if (depth < best_depth) {
            best_depth = depth;
            best = face;
        }
    }
    return static_cast<BoxFace>(best);
}

Vec3 project_onto_face(const AxisAlignedBox& box, BoxFace face, const Vec3& p) {
    const Vec3 lo = box_min(box), hi = box_max(box);
    Vec3 q;
    for (int axis = 0; axis < 3; ++axis) q[axis] = std::clamp(p[axis], lo[axis], hi[axis]);
    const int axis = face_axis(face);
    q[axis] = face_sign(face) > 0 ? hi[axis] : lo[axis];
    return q;
}

FingertipState resolve_proxy(const FingertipState& prev, const Vec3& real_pos, std::span<const SceneObject> scene) {
    if (!is_finite(real_pos)) throw ContractViolation("resolve_proxy: non-finite fingertip position");

    if (prev.in_contact && prev.contact_object) {
        const auto it = std::find_if(scene.begin(), scene.end(),
                                     [&](const SceneObject& o) { return o.id() == *prev.contact_object; });
        if (it != scene.end() && it->strictly_contains(real_pos)) {
            std::optional<BoxFace> face = prev.contact_face;
            if (!face && std::holds_alternative<AxisAlignedBox>(it->shape()))
                face = nearest_face(std::get<AxisAlignedBox>(it->shape()), real_pos);
            return constrained(*it, face, real_pos);
        }
    }

    for (const SceneObject& obj : scene) {
        if (!obj.strictly_contains(real_pos)) continue;
        std::optional<BoxFace> face;
        if (const auto* box = std::get_if<AxisAlignedBox>(&obj.shape())) {
            face = obj.strictly_contains(prev.real_pos) ? nearest_face(*box, real_pos)
                                                        : entry_face(*box, prev.real_pos, real_pos);
        }
        return constrained(obj, face, real_pos);
    }

    return FingertipState::free_at(real_pos);
}

double normalize_depth(double d) { return std::clamp(d / kMaxInterpenetration, 0.0, 1.0); }

InterpenetrationSample interpenetration(const FingertipState& state, double t) {
    if (!state.in_contact) return {t, 0.0, 0.0};
    const double d = distance(state.real_pos, state.avatar_pos);
    return {t, d, normalize_depth(d)};
}

Scene scene_from_json(const nlohmann::json& doc) {
    Scene scene;
    try {
        for (const auto& obj : doc.at("objects")) {
            const auto id = obj.at("id").get<std::string>();
            const auto type = obj.at("type").get<std::string>();
            if (type == "box") {
                scene.push_back(SceneObject::box(id, vec3_from_json(obj, "center"), vec3_from_json(obj, "half_extents")));
            } else if (type == "half_space") {
                scene.push_back(SceneObject::half_space(id, vec3_from_json(obj, "point"), vec3_from_json(obj, "normal")));
            } else {
                throw ConfigError(fmt::format("object '{}': unknown type '{}'", id, type));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene: ") + e.what());
    }

    for (std::size_t i = 0; i < scene.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.size(); ++j) {
            if (scene[i].id() == scene[j].id()) throw ConfigError("scene: duplicate object id '" + scene[i].id() + "'");
            const auto* a = std::get_if<AxisAlignedBox>(&scene[i].shape());
            const auto* b = std::get_if<AxisAlignedBox>(&scene[j].shape());
            if (a && b && boxes_overlap(*a, *b))
                throw ConfigError(fmt::format("scene: objects '{}' and '{}' overlap", scene[i].id(), scene[j].id()));
        }
    }
    return scene;
}

nlohmann::json scene_to_json(std::span<const SceneObject> scene) {
    auto objects = nlohmann::json::array();
    for (const auto& obj : scene) {
        std::visit(Overloaded{
                       [&](const AxisAlignedBox& b) {
                           objects.push_back({{"id", obj.id()},
                                              {"type", "box"},
                                              {"center", vec3_to_json(b.center)},
                                              {"half_extents", vec3_to_json(b.half_extents)}});
                       },
                       [&](const HalfSpace& h) {
                           objects.push_back({{"id", obj.id()},
                                              {"type", "half_space"},
                                              {"point", vec3_to_json(h.point)},
                                              {"normal", vec3_to_json(h.outward_normal)}});
                       },
                   },
                   obj.shape());
    }
    return {{"objects", objects}};
}

Scene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene file " + path.string());
    try {
        return scene_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scene file " + path.string() + ": " + e.what());
    }
}

}  // namespace etfb
