#pragma once

// God-object contact resolution for a single fingertip point.
//
// The avatar (proxy) follows the tracked fingertip in free space. Once the
// tracked point enters an object, the proxy sticks to the face of entry and
// slides along it until the tracked point leaves the object's volume.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "etfb/vec3.hpp"

namespace etfb {

/// Normalization depth: a 3 cm interpenetration maps to d_hat == 1.
inline constexpr double kMaxInterpenetration = 0.03;

/// Tolerance on the proxy lying on a surface.
inline constexpr double kSurfaceTolerance = 1e-7;

struct AxisAlignedBox {
    Vec3 center;
    Vec3 half_extents;
};

struct HalfSpace {
    Vec3 point;
    Vec3 outward_normal;
};

using Shape = std::variant<AxisAlignedBox, HalfSpace>;

/// Box face index: 2*axis + (positive side ? 1 : 0), i.e. -x,+x,-y,+y,-z,+z.
enum class BoxFace : int { NegX = 0, PosX, NegY, PosY, NegZ, PosZ };

constexpr int face_axis(BoxFace f) { return static_cast<int>(f) / 2; }
constexpr double face_sign(BoxFace f) { return (static_cast<int>(f) % 2) != 0 ? 1.0 : -1.0; }

class SceneObject {
public:
    /// Throws ConfigError for non-positive half extents or a non-unit normal.
    static SceneObject box(std::string id, Vec3 center, Vec3 half_extents);
    static SceneObject half_space(std::string id, Vec3 point, Vec3 outward_normal);

    const std::string& id() const { return id_; }
    const Shape& shape() const { return shape_; }

    /// Negative inside, zero on the boundary, positive outside.
    double signed_distance(const Vec3& p) const;

    /// True when p lies in the open interior.
    bool strictly_contains(const Vec3& p) const;

private:
    SceneObject(std::string id, Shape shape) : id_(std::move(id)), shape_(shape) {}

    std::string id_;
    Shape shape_;
};

using Scene = std::vector<SceneObject>;

struct FingertipState {
    Vec3 real_pos;
    Vec3 avatar_pos;
    bool in_contact = false;
    std::optional<std::string> contact_object;
    /// Face of entry for box contacts; empty for half spaces and free space.
    std::optional<BoxFace> contact_face;

    static FingertipState free_at(const Vec3& p) { return {p, p, false, std::nullopt, std::nullopt}; }
    friend bool operator==(const FingertipState&, const FingertipState&) = default;
};

struct InterpenetrationSample {
    double t = 0.0;      ///< seconds since trial start
    double d = 0.0;      ///< meters
    double d_hat = 0.0;  ///< d / 3 cm, clamped to [0,1]
};

/// Advance the god-object proxy to a new tracked position.
FingertipState resolve_proxy(const FingertipState& prev, const Vec3& real_pos, std::span<const SceneObject> scene);

InterpenetrationSample interpenetration(const FingertipState& state, double t);

double normalize_depth(double d);

/// Face through which the segment from `outside` to `inside` enters the box.
BoxFace entry_face(const AxisAlignedBox& box, const Vec3& outside, const Vec3& inside);

/// Face with the smallest penetration depth for a point inside the box.
BoxFace nearest_face(const AxisAlignedBox& box, const Vec3& inside);

/// Projection of p onto the given face, clamped to the face's extent.
Vec3 project_onto_face(const AxisAlignedBox& box, BoxFace face, const Vec3& p);

/// Scene file: {"objects": [{"id", "type": "box"|"half_space", ...}]}.
Scene scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(std::span<const SceneObject> scene);
Scene load_scene(const std::filesystem::path& path);

}  // namespace etfb
