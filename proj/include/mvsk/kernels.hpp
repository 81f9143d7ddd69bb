#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "mvsk/types.hpp"

namespace mvsk {

enum class Profile { WendlandC0, MaternC6, Gaussian };

[[nodiscard]] inline std::string_view profile_name(Profile p) {
    switch (p) {
        case Profile::WendlandC0: return "wendland0";
        case Profile::MaternC6: return "matern6";
        case Profile::Gaussian: return "gaussian";
    }
    return "unknown";
}

[[nodiscard]] inline std::optional<Profile> parse_profile(std::string_view name) {
    if (name == "wendland0") return Profile::WendlandC0;
    if (name == "matern6") return Profile::MaternC6;
    if (name == "gaussian") return Profile::Gaussian;
    return std::nullopt;
}

/// Profile evaluated at the already scaled argument t = eps * r.
[[nodiscard]] inline double unit_profile(Profile p, double t) noexcept {
    switch (p) {
        case Profile::WendlandC0: {
            const double s = 1.0 - t;
            return s > 0.0 ? s * s : 0.0;
        }
        case Profile::MaternC6:
            // Unnormalized: value 15 at the origin.
            return std::exp(-t) * (15.0 + t * (15.0 + t * (6.0 + t)));
        case Profile::Gaussian:
            return std::exp(-t * t);
    }
    return 0.0;
}

/// Radial kernel kappa(x, y) = phi(eps * |x - y|).
class RadialKernel {
public:
    RadialKernel(Profile profile, double epsilon) : profile_(profile), epsilon_(epsilon) {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
            throw InvalidArgument("shape parameter epsilon must be a positive finite number");
        }
    }

    [[nodiscard]] Profile profile() const noexcept { return profile_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

    [[nodiscard]] RadialKernel with_epsilon(double eps) const { return {profile_, eps}; }

    [[nodiscard]] double eval_profile(double r) const {
        if (!(r >= 0.0)) throw DomainError("kernel profile requires r >= 0");
        return unit_profile(profile_, epsilon_ * r);
    }

    [[nodiscard]] double at_zero() const noexcept { return unit_profile(profile_, 0.0); }

    template <typename A, typename B>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        return eval_profile(euclidean_distance(x, y));
    }

    friend bool operator==(const RadialKernel&, const RadialKernel&) = default;

private:
    Profile profile_;
    double epsilon_;
};

[[nodiscard]] inline double eval_profile(const RadialKernel& k, double r) { return k.eval_profile(r); }

template <typename A, typename B>
[[nodiscard]] double eval_kernel(const RadialKernel& k, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
    return k(x, y);
}

}  // namespace mvsk
