/**
 * Wire document types for the /api/v1 control plane.
 *
 * Every document carries an explicit schema_version and all timestamps
 * are integer milliseconds. These shapes mirror the server's JSON
 * exactly; nothing here is derived or recomputed on the client.
 */
export const SCHEMA_VERSION = 1;
export const TREATMENT_KINDS = [
    'error',
    'latency',
    'error_and_latency',
];
export const PLOT_OUTCOMES = [
    'success',
    'fallback_success',
    'fallback_failure',
];
