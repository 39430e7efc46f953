/**
 * Optimistic mutation helper: apply the UI change immediately, run the
 * remote call, revert on failure. The snapshot returned by apply() is
 * whatever revert() needs to undo the change.
 */

export interface OptimisticOptions<T> {
  apply: () => T;
  remote: () => Promise<void>;
  revert: (snapshot: T) => void;
  onError?: (error: unknown) => void;
}

export async function optimistic<T>(options: OptimisticOptions<T>): Promise<boolean> {
  const snapshot = options.apply();
  try {
    await options.remote();
    return true;
  } catch (error) {
    options.revert(snapshot);
    options.onError?.(error);
    return false;
  }
}
