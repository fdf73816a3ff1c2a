# expect: clean
import pandas as pd
from sklearn.cluster import KMeans
from sklearn.preprocessing import StandardScaler

customers = pd.read_csv("customers.csv")
scaled = StandardScaler().fit_transform(customers)
km = KMeans(n_clusters=4)
km.fit(scaled)
customers["segment"] = km.labels_
customers.to_csv("segments.csv")
