#pragma once

namespace tb {

inline constexpr const char* kEngineVersion = "1.0.0";
// Bumped whenever an output file layout changes.
inline constexpr const char* kSchemaVersion = "1";

#ifdef TB_GIT_DESCRIBE
inline constexpr const char* kBuildDescription = TB_GIT_DESCRIBE;
#else
inline constexpr const char* kBuildDescription = "unknown";
#endif

}  // namespace tb
