/**
 * Typed client for the study service API.
 *
 * The rater-facing surface is four endpoints; nothing here ever sees
 * provenance, file paths, or model names.
 */

export interface SessionSummary {
  session_id: string;
  total: number;
  completed: number;
}

export interface PendingItem {
  token: string;
  index: number;
  total: number;
}

export type NextItem = PendingItem | { done: true };

export interface RatingPayload {
  realism: number;
  judged_real: boolean;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export interface StudyApi {
  getSession(): Promise<SessionSummary>;
  getNextItem(): Promise<NextItem>;
  imageUrl(token: string): string;
  submitRating(token: string, payload: RatingPayload): Promise<void>;
}

export function isDone(item: NextItem): item is { done: true } {
  return (item as { done?: boolean }).done === true;
}

export function createApi(baseUrl = "", fetchFn: typeof fetch = fetch): StudyApi {
  async function getJson<T>(path: string): Promise<T> {
    const response = await fetchFn(`${baseUrl}${path}`);
    if (!response.ok) {
      throw new ApiError(response.status, `GET ${path} failed (${response.status})`);
    }
    return (await response.json()) as T;
  }

  return {
    getSession: () => getJson<SessionSummary>("/api/session"),

    getNextItem: () => getJson<NextItem>("/api/item/next"),

    imageUrl: (token: string) => `${baseUrl}/api/image/${token}`,

    submitRating: async (token: string, payload: RatingPayload): Promise<void> => {
      const response = await fetchFn(`${baseUrl}/api/item/${token}/rating`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
      if (response.status !== 204) {
        throw new ApiError(response.status, `rating rejected (${response.status})`);
      }
    },
  };
}
