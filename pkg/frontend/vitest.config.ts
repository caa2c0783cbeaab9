import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // The live-service suite builds a workspace and boots the real
    // engine server; generous timeouts keep cold numba caches survivable.
    testTimeout: 120_000,
    hookTimeout: 180_000,
  },
});
