import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // node environment keeps undici's fetch/FormData for real multipart
    // uploads; rendering gets an explicit JSDOM document in the test setup
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
