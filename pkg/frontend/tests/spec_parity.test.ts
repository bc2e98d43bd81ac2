/**
 * Form-to-wire parity: filling the form the way an operator would must
 * produce the same spec document the CLI submits for the equivalent
 * spec file. The fixtures are captured from the control plane's own
 * canonical serialization of its bundled specs.
 */

import { describe, expect, it } from 'vitest';
import galleryErrorSpec from './fixtures/alice.json';
import galleryLatencySpec from './fixtures/alice-latency-500.json';
import { ExperimentFormModel } from '../src/form.js';

/** Canonical JSON: recursively sorted keys, so two documents compare as
 * values rather than as serializer quirks. */
function stable(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stable).join(',')}]`;
  }
  if (typeof value === 'object' && value !== null) {
    const record = value as Record<string, unknown>;
    const entries = Object.keys(record)
      .sort()
      .map((k) => `${JSON.stringify(k)}:${stable(record[k])}`);
    return `{${entries.join(',')}}`;
  }
  return JSON.stringify(value);
}

describe('form-built spec documents', () => {
  it('matches the canonical gallery error spec field for field', () => {
    const model = new ExperimentFormModel();
    model.id = 'alice-gallery-error';
    model.targetCluster = 'api';
    model.injectionPoints = [{ caller: 'api', command: 'GetGallery', target: 'gallery' }];
    model.treatmentKind = 'error';
    model.divertedFraction = 0.003;
    model.durationMinutes = 30;
    model.trackedCommands = ['GetGallery'];
    model.safety = {
      sps_drop_threshold: 0.05,
      fallback_failure_threshold: 0.02,
      evaluation_interval_s: 5,
      min_samples: 250,
    };
    expect(model.toSpecDoc()).toEqual(galleryErrorSpec);
    expect(stable(model.toSpecDoc())).toBe(stable(galleryErrorSpec));
  });

  it('matches the canonical latency spec, carrying added_latency_ms', () => {
    const model = new ExperimentFormModel();
    model.id = 'alice-gallery-latency-500';
    model.targetCluster = 'api';
    model.injectionPoints = [{ caller: 'api', command: 'GetGallery', target: 'gallery' }];
    model.treatmentKind = 'latency';
    model.addedLatencyMs = 500;
    model.divertedFraction = 0.05;
    model.durationMinutes = 5;
    model.trackedCommands = ['GetGallery'];
    model.safety = {
      sps_drop_threshold: 0.05,
      fallback_failure_threshold: 0.02,
      evaluation_interval_s: 5,
      min_samples: 250,
    };
    expect(model.toSpecDoc()).toEqual(galleryLatencySpec);
    expect(stable(model.toSpecDoc())).toBe(stable(galleryLatencySpec));
  });

  it('omits added_latency_ms for pure error treatments', () => {
    const model = new ExperimentFormModel();
    model.treatmentKind = 'error';
    model.addedLatencyMs = 500;
    expect('added_latency_ms' in model.toSpecDoc().treatment).toBe(false);
  });

  it('keeps the form free of fields a spec document does not have', () => {
    const model = new ExperimentFormModel();
    model.id = 'x';
    model.targetCluster = 'api';
    model.injectionPoints = [{ caller: 'api', command: 'GetGallery', target: 'gallery' }];
    model.trackedCommands = ['GetGallery'];
    expect(Object.keys(model.toSpecDoc()).sort()).toEqual(
      Object.keys(galleryErrorSpec).sort(),
    );
  });
});
